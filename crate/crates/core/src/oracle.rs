//! Minimum-curvature training targets.
//!
//! The objective is the sum of squared discrete curvatures of the line
//! through the waypoints, each curvature taken from the circle through three
//! consecutive points. It is minimised over the waypoint fractions by a
//! projected descent method: each iteration takes a damped Gauss-Newton
//! direction on the free coordinates (the plain negative gradient if that
//! fails), projects onto the bounds and halves the step until the
//! objective decreases, so accepted iterates never increase it.

use crate::error::{Error, Result};
use crate::geometry::{build_normals, resample_centerline, resolve_intersections, NormalSet};
use crate::geometry::{DEFAULT_MAX_TILT, DEFAULT_TILT_STEP};
use crate::point::Point;
use crate::trackio::Track;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub max_iters: usize,
    /// Stop once an accepted step lowers the objective by less than
    /// `tol` times its current value.
    pub tol: f64,
    /// Largest move of any waypoint in one iteration, as a fraction of its normal.
    pub step_size: f64,
    /// Waypoints are kept inside `[margin, 1 - margin]`.
    pub margin: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-12,
            step_size: 0.25,
            margin: 1e-3,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(Error::InvalidConfig(format!("margin {} outside [0, 0.5)", self.margin)));
        }
        // A zero step is accepted and leaves the initial line in place.
        if !(self.step_size >= 0.0) || !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("step_size and tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Squared circumcircle curvature of `(a, b, c)` and its gradient with
/// respect to each point. Degenerate triples contribute zero.
fn curvature_sq_grad(a: Point, b: Point, c: Point) -> (f64, [Point; 3]) {
    let u = b - a;
    let v = c - a;
    let cr = u.cross(v);
    let la = u.norm_sq();
    let lb = (c - b).norm_sq();
    let ld = v.norm_sq();
    let denom = la * lb * ld;
    if !(denom > 0.0) {
        return (0.0, [Point::default(); 3]);
    }
    let k = 4.0 * cr * cr / denom;
    // dC/db, dC/dc; dC/da = -(both)
    let dc_db = Point::new(v.y, -v.x);
    let dc_dc = Point::new(-u.y, u.x);
    let dc_da = -(dc_db + dc_dc);
    let s = 8.0 * cr / denom;
    let ga = u * (-2.0 / la); // dA/da / A
    let gb_a = u * (2.0 / la); // dA/db / A
    let gb_b = (c - b) * (-2.0 / lb);
    let gc_b = (c - b) * (2.0 / lb);
    let ga_d = v * (-2.0 / ld);
    let gc_d = v * (2.0 / ld);
    let grad_a = dc_da * s - (ga + ga_d) * k;
    let grad_b = dc_db * s - (gb_a + gb_b) * k;
    let grad_c = dc_dc * s - (gc_b + gc_d) * k;
    (k, [grad_a, grad_b, grad_c])
}

fn triples(n: usize, cyclic: bool) -> impl Iterator<Item = (usize, usize, usize)> {
    let range = if cyclic { 0..n } else { 1..n.saturating_sub(1) };
    range.map(move |i| ((i + n - 1) % n, i, (i + 1) % n))
}

fn check_len(ns: &NormalSet, w: &[f64]) -> Result<()> {
    if w.len() != ns.len() {
        return Err(Error::LengthMismatch {
            expected: ns.len(),
            actual: w.len(),
        });
    }
    Ok(())
}

/// Sum of squared discrete curvatures of the line through `w`.
pub fn curvature_objective(ns: &NormalSet, w: &[f64]) -> Result<f64> {
    check_len(ns, w)?;
    let pts = ns.line_points(w)?;
    Ok(objective_of_points(&pts, ns.cyclic))
}

fn objective_of_points(pts: &[Point], cyclic: bool) -> f64 {
    triples(pts.len(), cyclic)
        .map(|(a, b, c)| curvature_sq_grad(pts[a], pts[b], pts[c]).0)
        .sum()
}

/// Objective and its gradient with respect to every waypoint fraction.
pub fn objective_and_gradient(ns: &NormalSet, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(ns, w)?;
    let pts = ns.line_points(w)?;
    let n = pts.len();
    let mut grad_p = vec![Point::default(); n];
    let mut total = 0.0;
    for (a, b, c) in triples(n, ns.cyclic) {
        let (k, g) = curvature_sq_grad(pts[a], pts[b], pts[c]);
        total += k;
        grad_p[a] = grad_p[a] + g[0];
        grad_p[b] = grad_p[b] + g[1];
        grad_p[c] = grad_p[c] + g[2];
    }
    let grad = ns
        .normals
        .iter()
        .zip(&grad_p)
        .map(|(nrm, gp)| gp.dot(nrm.right_end - nrm.left_end))
        .collect();
    Ok((total, grad))
}

/// Result of a solver run including the objective at every accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct McpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
}

pub fn mcp_solve(ns: &NormalSet, cfg: &OracleConfig) -> Result<Vec<f64>> {
    Ok(mcp_solve_traced(ns, cfg)?.w)
}

pub fn mcp_solve_traced(ns: &NormalSet, cfg: &OracleConfig) -> Result<McpSolution> {
    cfg.validate()?;
    let (lo, hi) = (cfg.margin, 1.0 - cfg.margin);
    let n = ns.len();
    let mut w: Vec<f64> = vec![0.5f64.clamp(lo, hi); n];
    let mut f = curvature_objective(ns, &w)?;
    let mut history = vec![f];
    let mut iterations = 0;
    let mut damping = 1e-6;
    if cfg.step_size == 0.0 {
        return Ok(McpSolution {
            w,
            objective: f,
            history,
            iterations,
        });
    }
    let mut trial = vec![0.0; n];

    while iterations < cfg.max_iters && f > 0.0 {
        iterations += 1;
        let lin = linearise(ns, &w);
        let grad = lin.gradient();
        // bound-constrained coordinates the gradient pushes further out stay fixed
        let free: Vec<bool> = (0..n)
            .map(|i| !((w[i] <= lo && grad[i] > 0.0) || (w[i] >= hi && grad[i] < 0.0)))
            .collect();
        let mut accepted = None;
        for direction in [
            lin.gauss_newton_step(&grad, &free, damping),
            Some(grad.iter().map(|g| -g).collect()),
        ] {
            let Some(mut d) = direction else { continue };
            for (di, &fr) in d.iter_mut().zip(&free) {
                if !fr {
                    *di = 0.0;
                }
            }
            let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !(dmax > 0.0) || !dmax.is_finite() {
                continue;
            }
            let mut t = (cfg.step_size / dmax).min(1.0);
            for _ in 0..60 {
                let mut moved = false;
                for i in 0..n {
                    trial[i] = (w[i] + t * d[i]).clamp(lo, hi);
                    moved |= trial[i] != w[i];
                }
                if !moved {
                    break;
                }
                let f_new = curvature_objective(ns, &trial)?;
                if f_new < f {
                    accepted = Some((f_new, t == (cfg.step_size / dmax).min(1.0)));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            damping *= 10.0;
        }
        let Some((f_new, full_step)) = accepted else { break };
        damping = if full_step {
            (damping / 3.0).max(1e-12)
        } else {
            (damping * 2.0).min(1e6)
        };
        let decrease = f - f_new;
        std::mem::swap(&mut w, &mut trial);
        f = f_new;
        history.push(f);
        if decrease <= cfg.tol * f {
            break;
        }
    }
    Ok(McpSolution {
        w,
        objective: f,
        history,
        iterations,
    })
}

/// Signed curvature residuals of the line and their derivatives with
/// respect to the three waypoints each one depends on.
struct Linearisation {
    n: usize,
    rows: Vec<([usize; 3], [f64; 3], f64)>,
}

impl Linearisation {
    fn gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (idx, jac, r) in &self.rows {
            for k in 0..3 {
                g[idx[k]] += 2.0 * r * jac[k];
            }
        }
        g
    }

    /// Damped Gauss-Newton step restricted to the free coordinates.
    fn gauss_newton_step(&self, grad: &[f64], free: &[bool], damping: f64) -> Option<Vec<f64>> {
        let mut pos = vec![usize::MAX; self.n];
        let mut vars = Vec::new();
        for i in 0..self.n {
            if free[i] {
                pos[i] = vars.len();
                vars.push(i);
            }
        }
        let m = vars.len();
        if m == 0 {
            return None;
        }
        let mut first: Vec<usize> = (0..m).collect();
        for (idx, _, _) in &self.rows {
            let p: Vec<usize> = idx.iter().map(|&i| pos[i]).filter(|&p| p != usize::MAX).collect();
            if let Some(&lowest) = p.iter().min() {
                for &q in &p {
                    first[q] = first[q].min(lowest);
                }
            }
        }
        let mut env = Envelope::new(first);
        for (idx, jac, _) in &self.rows {
            for a in 0..3 {
                for b in 0..3 {
                    let (pa, pb) = (pos[idx[a]], pos[idx[b]]);
                    if pa != usize::MAX && pb != usize::MAX && pb <= pa {
                        env.add(pa, pb, jac[a] * jac[b]);
                    }
                }
            }
        }
        let mean_diag = (0..m).map(|i| env.get(i, i)).sum::<f64>() / m as f64;
        let shift = damping * mean_diag.max(1e-300);
        for i in 0..m {
            env.add(i, i, shift);
        }
        let rhs: Vec<f64> = vars.iter().map(|&i| -0.5 * grad[i]).collect();
        let sol = env.cholesky_solve(rhs)?;
        let mut d = vec![0.0; self.n];
        for (k, &i) in vars.iter().enumerate() {
            d[i] = sol[k];
        }
        Some(d)
    }
}

fn linearise(ns: &NormalSet, w: &[f64]) -> Linearisation {
    let pts: Vec<Point> = ns
        .normals
        .iter()
        .zip(w)
        .map(|(nrm, &wi)| nrm.left_end * (1.0 - wi) + nrm.right_end * wi)
        .collect();
    let dirs: Vec<Point> = ns.normals.iter().map(|nrm| nrm.right_end - nrm.left_end).collect();
    let rows = triples(pts.len(), ns.cyclic)
        .map(|(a, b, c)| {
            let (r, g) = curvature_grad(pts[a], pts[b], pts[c]);
            ([a, b, c], [g[0].dot(dirs[a]), g[1].dot(dirs[b]), g[2].dot(dirs[c])], r)
        })
        .collect();
    Linearisation { n: pts.len(), rows }
}

/// Signed circumcircle curvature of `(a, b, c)` and its gradient.
fn curvature_grad(a: Point, b: Point, c: Point) -> (f64, [Point; 3]) {
    let u = b - a;
    let v = c - a;
    let cr = u.cross(v);
    let la = u.norm_sq();
    let lb = (c - b).norm_sq();
    let ld = v.norm_sq();
    let denom = la * lb * ld;
    if !(denom > 0.0) {
        return (0.0, [Point::default(); 3]);
    }
    let root = denom.sqrt();
    let r = 2.0 * cr / root;
    let dc_db = Point::new(v.y, -v.x);
    let dc_dc = Point::new(-u.y, u.x);
    let dc_da = -(dc_db + dc_dc);
    let s = 2.0 / root;
    let h = 0.5 * r;
    let grad_a = dc_da * s - (u * (-2.0 / la) + v * (-2.0 / ld)) * h;
    let grad_b = dc_db * s - (u * (2.0 / la) + (c - b) * (-2.0 / lb)) * h;
    let grad_c = dc_dc * s - ((c - b) * (2.0 / lb) + v * (2.0 / ld)) * h;
    (r, [grad_a, grad_b, grad_c])
}

/// Symmetric matrix stored by rows of its lower triangle, each row starting
/// at its first structural non-zero. Cholesky keeps this profile, so a
/// banded matrix with a few dense border rows factors in near-linear time.
struct Envelope {
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Envelope {
    fn new(first: Vec<usize>) -> Self {
        let rows = first.iter().enumerate().map(|(i, &f)| vec![0.0; i - f + 1]).collect();
        Self { first, rows }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let f = self.first[i];
        self.rows[i][j - f] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let f = self.first[i];
        if j < f {
            0.0
        } else {
            self.rows[i][j - f]
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn cholesky_solve(mut self, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let m = self.rows.len();
        for i in 0..m {
            let fi = self.first[i];
            for j in fi..=i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let mut s = self.rows[i][j - fi];
                for k in start..j {
                    s -= self.rows[i][k - fi] * self.rows[j][k - fj];
                }
                if j < i {
                    self.rows[i][j - fi] = s / self.rows[j][j - fj];
                } else {
                    if !(s > 0.0) {
                        return None;
                    }
                    self.rows[i][i - fi] = s.sqrt();
                }
            }
        }
        // L y = b
        for i in 0..m {
            let fi = self.first[i];
            let mut s = b[i];
            for k in fi..i {
                s -= self.rows[i][k - fi] * b[k];
            }
            b[i] = s / self.rows[i][i - fi];
        }
        // L^T x = y
        for i in (0..m).rev() {
            let fi = self.first[i];
            b[i] /= self.rows[i][i - fi];
            let xi = b[i];
            for k in fi..i {
                b[k] -= self.rows[i][k - fi] * xi;
            }
        }
        Some(b)
    }
}

/// Resample, build and repair normals, then solve for minimum curvature.
///
/// Targets assume a zero-width vehicle; width is applied at prediction time.
pub fn generate_targets(track: &Track, cfg: &OracleConfig, spacing: f64) -> Result<(NormalSet, Vec<f64>)> {
    if !track.closed {
        return Err(Error::DegenerateTrack("target generation needs a closed lap".into()));
    }
    let resampled = resample_centerline(track, spacing)?;
    let ns = build_normals(&resampled)?;
    let ns = resolve_intersections(&ns, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP)?;
    let w = mcp_solve(&ns, cfg)?;
    Ok((ns, w))
}
