//! Synthetic circuits for tests, benchmarks and the desk-scale corpus.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::point::Point;
use crate::trackio::Track;

pub fn circle_track(name: &str, radius: f64, halfwidth: f64, points: usize) -> Result<Track> {
    let pts = (0..points)
        .map(|k| {
            let a = TAU * k as f64 / points as f64;
            Point::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    Track::symmetric(name, pts, halfwidth, true)
}

/// Stadium: two straights of `straight` metres joined by half circles.
pub fn oval_track(name: &str, straight: f64, radius: f64, halfwidth: f64, step: f64) -> Result<Track> {
    let r = radius;
    let corners = [
        Point::new(-straight / 2.0, -r),
        Point::new(straight / 2.0, -r),
        Point::new(straight / 2.0, r),
        Point::new(-straight / 2.0, r),
    ];
    let mut pts = Vec::new();
    let arc_n = ((PI * r / step).round() as usize).max(2);
    let line_n = ((straight / step).round() as usize).max(1);
    for k in 0..line_n {
        pts.push(corners[0].lerp(corners[1], k as f64 / line_n as f64));
    }
    for k in 0..arc_n {
        let a = -PI / 2.0 + PI * k as f64 / arc_n as f64;
        pts.push(Point::new(straight / 2.0 + r * a.cos(), r * a.sin()));
    }
    for k in 0..line_n {
        pts.push(corners[2].lerp(corners[3], k as f64 / line_n as f64));
    }
    for k in 0..arc_n {
        let a = PI / 2.0 + PI * k as f64 / arc_n as f64;
        pts.push(Point::new(-straight / 2.0 + r * a.cos(), r * a.sin()));
    }
    Track::symmetric(name, pts, halfwidth, true)
}

/// Convex polygon (counter-clockwise vertices) with every corner filleted
/// to `radius`, sampled roughly every `step` metres.
pub fn rounded_polygon(name: &str, vertices: &[Point], radius: f64, halfwidth: f64, step: f64) -> Result<Track> {
    let n = vertices.len();
    let mut pts = Vec::new();
    // fillet tangent points for each corner
    let mut entry = Vec::with_capacity(n);
    let mut exit = Vec::with_capacity(n);
    let mut centre = Vec::with_capacity(n);
    let mut sweep = Vec::with_capacity(n);
    for i in 0..n {
        let prev = vertices[(i + n - 1) % n];
        let v = vertices[i];
        let next = vertices[(i + 1) % n];
        let d_in = (v - prev) * (1.0 / v.dist(prev));
        let d_out = (next - v) * (1.0 / next.dist(v));
        let turn = crate::point::signed_angle(d_in, d_out);
        let t = radius * (turn / 2.0).tan();
        entry.push(v - d_in * t);
        exit.push(v + d_out * t);
        centre.push(v - d_in * t + d_in.perp() * radius);
        sweep.push(turn);
    }
    for i in 0..n {
        let c = centre[i];
        let start = entry[i] - c;
        let arc_n = ((sweep[i] * radius / step).ceil() as usize).max(2);
        for k in 0..arc_n {
            pts.push(c + start.rotate(sweep[i] * k as f64 / arc_n as f64));
        }
        let a = exit[i];
        let b = entry[(i + 1) % n];
        let line_n = ((a.dist(b) / step).round() as usize).max(1);
        for k in 0..line_n {
            pts.push(a.lerp(b, k as f64 / line_n as f64));
        }
    }
    Track::symmetric(name, pts, halfwidth, true)
}

/// Rounded square whose corner radius is smaller than the half-width, so
/// the inner boundary folds over and plain normals cross at every corner.
pub fn hairpin_square(name: &str, side: f64, radius: f64, halfwidth: f64) -> Result<Track> {
    let h = side / 2.0;
    let v = [
        Point::new(-h, -h),
        Point::new(h, -h),
        Point::new(h, h),
        Point::new(-h, h),
    ];
    rounded_polygon(name, &v, radius, halfwidth, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTrackConfig {
    pub min_radius: f64,
    pub max_radius: f64,
    /// Sum of the relative harmonic amplitudes.
    pub roughness: f64,
    pub min_halfwidth: f64,
    pub max_halfwidth: f64,
    pub points: usize,
}

impl Default for RandomTrackConfig {
    fn default() -> Self {
        Self {
            min_radius: 90.0,
            max_radius: 150.0,
            roughness: 0.3,
            min_halfwidth: 5.0,
            max_halfwidth: 7.0,
            points: 480,
        }
    }
}

impl RandomTrackConfig {
    /// Short, twisty circuits whose bends fit inside a window of ten
    /// normals either side at 5 m spacing.
    pub fn compact() -> Self {
        Self {
            min_radius: 45.0,
            max_radius: 75.0,
            roughness: 0.4,
            min_halfwidth: 4.0,
            max_halfwidth: 6.0,
            points: 480,
        }
    }
}

/// Smooth closed circuit: a polar curve `r(phi)` made of a few random
/// harmonics, stretched along one axis, with slowly varying widths.
pub fn random_track(name: &str, seed: u64, cfg: &RandomTrackConfig) -> Result<Track> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(cfg.min_radius..=cfg.max_radius);
    let stretch = rng.random_range(0.65..=1.0);
    let harmonics: Vec<(f64, f64, f64)> = (2..=5)
        .map(|k| {
            (
                k as f64,
                rng.random_range(0.2..1.0) / k as f64,
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    let total: f64 = harmonics.iter().map(|h| h.1).sum();
    let norm = cfg.roughness / total;
    let hw_mid = rng.random_range(cfg.min_halfwidth..=cfg.max_halfwidth);
    let hw_amp = 0.5 * (cfg.max_halfwidth - cfg.min_halfwidth);
    let (ph_l, ph_r) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let rotation = rng.random_range(0.0..TAU);

    let n = cfg.points;
    let mut pts = Vec::with_capacity(n);
    let mut wl = Vec::with_capacity(n);
    let mut wr = Vec::with_capacity(n);
    for j in 0..n {
        let phi = TAU * j as f64 / n as f64;
        let r = base
            * (1.0
                + harmonics
                    .iter()
                    .map(|&(k, a, p)| norm * a * (k * phi + p).cos())
                    .sum::<f64>());
        pts.push(Point::new(r * phi.cos(), stretch * r * phi.sin()).rotate(rotation));
        wl.push(hw_mid + hw_amp * (phi + ph_l).sin());
        wr.push(hw_mid + hw_amp * (2.0 * phi + ph_r).sin());
    }
    Track::new(name, pts, wl, wr, true)
}

/// `count` random circuits named `{prefix}{index}`, seeded from `seed`.
pub fn random_corpus(prefix: &str, count: usize, seed: u64, cfg: &RandomTrackConfig) -> Result<Vec<Track>> {
    (0..count)
        .map(|i| {
            random_track(
                &format!("{prefix}{i:03}"),
                seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                cfg,
            )
        })
        .collect()
}
