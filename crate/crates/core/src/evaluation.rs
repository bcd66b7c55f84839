//! Accuracy metrics against a reference line and latency measurement.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::NormalSet;
use crate::network::MlpModel;
use crate::point::Point;
use crate::predictor::{predict_line, RacingLine};
use crate::trackio::Track;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub mean_error: f64,
    pub ci50: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Signed, metres, positive towards the right end of each normal.
    pub per_normal_error: Vec<f64>,
    pub rmse: f64,
    pub mae: f64,
    pub mean_error: f64,
    pub ci50: f64,
    pub ci95: f64,
    /// `None` when the reference line has no apex.
    pub apex_error_mae: Option<f64>,
    pub apex_count: usize,
    pub latency: Option<f64>,
}

impl ErrorReport {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            rmse: self.rmse,
            mae: self.mae,
            mean_error: self.mean_error,
            ci50: self.ci50,
            ci95: self.ci95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApexConfig {
    pub kappa_min: f64,
    /// Non-maximum suppression radius in normals.
    pub radius: usize,
}

impl Default for ApexConfig {
    fn default() -> Self {
        Self {
            kappa_min: 1.0 / 200.0,
            radius: 5,
        }
    }
}

pub fn lateral_errors(pred: &RacingLine, reference: &RacingLine, ns: &NormalSet) -> Result<Vec<f64>> {
    for len in [pred.w.len(), reference.w.len()] {
        if len != ns.len() {
            return Err(Error::LengthMismatch {
                expected: ns.len(),
                actual: len,
            });
        }
    }
    Ok(pred
        .w
        .iter()
        .zip(&reference.w)
        .zip(&ns.normals)
        .map(|((p, r), n)| (p - r) * n.length_l)
        .collect())
}

/// Smallest radius holding a fraction `p` of the sorted magnitudes.
fn quantile_radius(sorted_abs: &[f64], p: f64) -> f64 {
    let n = sorted_abs.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted_abs[k - 1]
}

/// Mean of `v`, accumulated as offsets from the first element so that a
/// constant series returns its value exactly.
fn shifted_mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = v.clone();
    let Some(first) = it.next() else { return 0.0 };
    let n = v.count() as f64;
    first + it.map(|x| x - first).sum::<f64>() / n
}

pub fn summary_metrics(errors: &[f64]) -> Result<Metrics> {
    if errors.is_empty() {
        return Err(Error::Empty);
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let mae = shifted_mean(abs.iter().copied());
    let mean = shifted_mean(errors.iter().copied());
    let mse = shifted_mean(errors.iter().map(|e| e * e));
    abs.sort_by(f64::total_cmp);
    // the orderings hold exactly in real arithmetic; only rounding can break them
    let mean_error = mean.clamp(-mae, mae);
    let rmse = mse.sqrt().max(mae);
    Ok(Metrics {
        rmse,
        mae,
        mean_error,
        ci50: quantile_radius(&abs, 0.5),
        ci95: quantile_radius(&abs, 0.95),
    })
}

/// Signed circumcircle curvature at each vertex; zero at open ends.
pub fn discrete_curvature(points: &[Point], closed: bool) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|i| {
            if !closed && (i == 0 || i + 1 == n) {
                return 0.0;
            }
            let a = points[(i + n - 1) % n];
            let b = points[i];
            let c = points[(i + 1) % n];
            let denom = a.dist(b) * b.dist(c) * a.dist(c);
            if denom == 0.0 {
                0.0
            } else {
                2.0 * (b - a).cross(c - b) / denom
            }
        })
        .collect()
}

/// Curvature peaks of a line above `kappa_min`, thinned so no two kept
/// peaks lie within `radius` normals. Stronger peaks win; ties go to the
/// lower index.
pub fn detect_apexes(points: &[Point], closed: bool, cfg: &ApexConfig) -> Vec<usize> {
    let n = points.len();
    let k: Vec<f64> = discrete_curvature(points, closed).iter().map(|v| v.abs()).collect();
    let neighbours = |i: usize| -> [Option<usize>; 2] {
        if closed {
            [Some((i + n - 1) % n), Some((i + 1) % n)]
        } else {
            [i.checked_sub(1), (i + 1 < n).then_some(i + 1)]
        }
    };
    let mut cand: Vec<usize> = (0..n)
        .filter(|&i| k[i] >= cfg.kappa_min && neighbours(i).iter().flatten().all(|&j| k[i] >= k[j]))
        .collect();
    cand.sort_by(|&a, &b| k[b].total_cmp(&k[a]).then(a.cmp(&b)));
    let dist = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        if closed {
            d.min(n - d)
        } else {
            d
        }
    };
    let mut kept: Vec<usize> = Vec::new();
    for c in cand {
        if kept.iter().all(|&a| dist(a, c) > cfg.radius) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Mean absolute lateral error at the apexes of the reference line.
pub fn apex_error(pred: &RacingLine, reference: &RacingLine, ns: &NormalSet, cfg: &ApexConfig) -> Result<f64> {
    let errors = lateral_errors(pred, reference, ns)?;
    let apexes = detect_apexes(&reference.points, ns.cyclic, cfg);
    apex_mean(&errors, &apexes)
}

fn apex_mean(errors: &[f64], apexes: &[usize]) -> Result<f64> {
    if apexes.is_empty() {
        return Err(Error::NoApexes);
    }
    Ok(apexes.iter().map(|&i| errors[i].abs()).sum::<f64>() / apexes.len() as f64)
}

fn report_from(errors: Vec<f64>, apex: Option<f64>, apex_count: usize) -> Result<ErrorReport> {
    let m = summary_metrics(&errors)?;
    Ok(ErrorReport {
        per_normal_error: errors,
        rmse: m.rmse,
        mae: m.mae,
        mean_error: m.mean_error,
        ci50: m.ci50,
        ci95: m.ci95,
        apex_error_mae: apex,
        apex_count,
        latency: None,
    })
}

pub fn evaluate(pred: &RacingLine, reference: &RacingLine, ns: &NormalSet, cfg: &ApexConfig) -> Result<ErrorReport> {
    let errors = lateral_errors(pred, reference, ns)?;
    let apexes = detect_apexes(&reference.points, ns.cyclic, cfg);
    let apex = apex_mean(&errors, &apexes).ok();
    report_from(errors, apex, apexes.len())
}

/// Aggregate over several tracks: metrics of the pooled error series, so
/// each track weighs in by its normal count, and apex errors pooled by
/// apex count.
pub fn pooled_report(reports: &[ErrorReport]) -> Result<ErrorReport> {
    let errors: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.per_normal_error.iter().copied())
        .collect();
    let mut apex_sum = 0.0;
    let mut apex_n = 0;
    for r in reports {
        if let Some(a) = r.apex_error_mae {
            apex_sum += a * r.apex_count as f64;
            apex_n += r.apex_count;
        }
    }
    let mut out = report_from(errors, (apex_n > 0).then(|| apex_sum / apex_n as f64), apex_n)?;
    let lat: Vec<f64> = reports.iter().filter_map(|r| r.latency).collect();
    if !lat.is_empty() {
        out.latency = Some(lat.iter().sum::<f64>() / lat.len() as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latency {
    pub median_seconds: f64,
    pub normals: usize,
    pub repetitions: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median wall-clock time of a full single-threaded `predict_line`,
/// geometry and windowing included.
pub fn measure_latency(model: &MlpModel, track: &Track, repetitions: usize) -> Result<Latency> {
    let repetitions = repetitions.max(1);
    let mut times = Vec::with_capacity(repetitions);
    let mut normals = 0;
    for _ in 0..repetitions {
        let start = Instant::now();
        let line = predict_line(model, track, 0.0)?;
        times.push(start.elapsed().as_secs_f64());
        normals = line.w.len();
    }
    Ok(Latency {
        median_seconds: median(&mut times),
        normals,
        repetitions,
    })
}

/// Maximum-likelihood Laplace fit: location is the median, scale the mean
/// absolute deviation from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceFit {
    pub location: f64,
    pub scale: f64,
}

impl LaplaceFit {
    /// Radius around the location holding probability `p`.
    pub fn interval(&self, p: f64) -> f64 {
        -self.scale * (1.0 - p).ln()
    }
}

pub fn fit_laplace(errors: &[f64]) -> Result<LaplaceFit> {
    if errors.is_empty() {
        return Err(Error::Empty);
    }
    let mut v = errors.to_vec();
    let location = median(&mut v);
    let scale = errors.iter().map(|e| (e - location).abs()).sum::<f64>() / errors.len() as f64;
    Ok(LaplaceFit { location, scale })
}

/// Mean squared second difference of a waypoint series.
pub fn roughness(w: &[f64], cyclic: bool) -> f64 {
    let n = w.len();
    if n < 3 {
        return 0.0;
    }
    let idx: Vec<usize> = if cyclic { (0..n).collect() } else { (1..n - 1).collect() };
    let sum: f64 = idx
        .iter()
        .map(|&i| {
            let d = w[(i + n - 1) % n] - 2.0 * w[i] + w[(i + 1) % n];
            d * d
        })
        .sum();
    sum / idx.len() as f64
}
