//! Centreline resampling, boundary-spanning normals and pseudo-normal repair.
//!
//! Orientation convention: "left" is the direction of travel rotated by +90
//! degrees. A waypoint fraction `w` runs from 0 at the left end of a normal
//! to 1 at its right end.

use crate::error::{Error, Result};
use crate::point::{point_in_polygon, segment_intersection, signed_angle, Point};
use crate::trackio::Track;

pub const DEFAULT_MAX_TILT: f64 = std::f64::consts::PI / 4.0;
pub const DEFAULT_TILT_STEP: f64 = std::f64::consts::PI / 180.0;

/// A segment across the track through one centreline station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub center: Point,
    pub left_end: Point,
    pub right_end: Point,
    /// Unit direction of travel at the station.
    pub tangent: Point,
    pub length_l: f64,
    /// Tilt from the true perpendicular; positive rotates the left end backwards.
    pub theta: f64,
    /// Heading change of the centreline at this station.
    pub alpha: f64,
}

impl Normal {
    /// Unit vector from the centre towards the left end.
    pub fn left_dir(&self) -> Point {
        if self.theta == 0.0 {
            self.tangent.perp()
        } else {
            self.tangent.perp().rotate(self.theta)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalSet {
    pub normals: Vec<Normal>,
    pub spacing: f64,
    pub cyclic: bool,
    /// Left and right track edges traced by the untilted normals.
    pub boundary_left: Vec<Point>,
    pub boundary_right: Vec<Point>,
}

impl NormalSet {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.normals.iter().map(|n| n.center).collect()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.normals.iter().map(|n| n.length_l).collect()
    }

    /// World coordinates of the waypoints `w` (one per normal).
    pub fn line_points(&self, w: &[f64]) -> Result<Vec<Point>> {
        if w.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: w.len(),
            });
        }
        self.normals
            .iter()
            .zip(w)
            .map(|(n, &wi)| waypoint_to_world(n, wi))
            .collect()
    }
}

/// Cumulative arc length along a polyline.
struct ArcTable {
    pts: Vec<Point>,
    cum: Vec<f64>,
}

impl ArcTable {
    fn new(points: &[Point], closed: bool) -> Self {
        let mut pts = points.to_vec();
        if closed {
            pts.push(points[0]);
        }
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 1..pts.len() {
            acc += pts[k - 1].dist(pts[k]);
            cum.push(acc);
        }
        ArcTable { pts, cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Segment index and local parameter for arc position `s`, walking
    /// forward from segment `hint`.
    fn locate(&self, s: f64, hint: &mut usize) -> (usize, f64) {
        let last = self.pts.len() - 2;
        while *hint < last && self.cum[*hint + 1] <= s {
            *hint += 1;
        }
        let j = *hint;
        let seg = self.cum[j + 1] - self.cum[j];
        let t = if seg > 0.0 {
            ((s - self.cum[j]) / seg).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (j, t)
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Resamples the centreline at uniform arc-length spacing.
///
/// The realised spacing is `length / round(length / spacing)` so that both
/// ends of an open track, or the closing segment of a lap, are hit exactly.
/// Half-widths are interpolated linearly in arc length.
pub fn resample_centerline(track: &Track, spacing: f64) -> Result<Track> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::ZeroSpacing(spacing));
    }
    track.validate()?;
    let table = ArcTable::new(&track.points, track.closed);
    let total = table.total();
    let mut hl = track.halfwidth_left.clone();
    let mut hr = track.halfwidth_right.clone();
    if track.closed {
        hl.push(hl[0]);
        hr.push(hr[0]);
    }

    let (count, step) = if track.closed {
        if total < 3.0 * spacing {
            return Err(Error::DegenerateTrack(format!(
                "perimeter {total:.3} m shorter than three spacings"
            )));
        }
        let n = (total / spacing).round() as usize;
        (n, total / n as f64)
    } else {
        let segs = ((total / spacing).round() as usize).max(1);
        (segs + 1, total / segs as f64)
    };
    if count < 3 {
        return Err(Error::DegenerateTrack(format!(
            "length {total:.3} m yields only {count} resampled points"
        )));
    }

    let mut points = Vec::with_capacity(count);
    let mut left = Vec::with_capacity(count);
    let mut right = Vec::with_capacity(count);
    let mut hint = 0;
    for k in 0..count {
        if !track.closed && k == count - 1 {
            let last = track.points.len() - 1;
            points.push(track.points[last]);
            left.push(track.halfwidth_left[last]);
            right.push(track.halfwidth_right[last]);
            break;
        }
        let s = k as f64 * step;
        let (j, t) = table.locate(s, &mut hint);
        points.push(table.pts[j].lerp(table.pts[j + 1], t));
        left.push(lerp(hl[j], hl[j + 1], t));
        right.push(lerp(hr[j], hr[j + 1], t));
    }
    Track::new(track.name.clone(), points, left, right, track.closed)
}

/// Builds one normal per centreline point.
///
/// Tangents are central differences (one-sided at the ends of an open
/// track). `alpha` is the signed turning angle of the centreline polyline at
/// each station, so a closed counterclockwise lap sums to `2π`.
pub fn build_normals(track: &Track) -> Result<NormalSet> {
    track.validate()?;
    let pts = &track.points;
    let n = pts.len();
    let cyclic = track.closed;
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let (prev, next) = if cyclic {
            ((i + n - 1) % n, (i + 1) % n)
        } else {
            (i.saturating_sub(1), (i + 1).min(n - 1))
        };
        let d = pts[next] - pts[prev];
        let len = d.norm();
        if !(len > 1e-12) {
            return Err(Error::DegenerateTangent { index: i });
        }
        let tangent = Point::new(d.x / len, d.y / len);
        let left = tangent.perp();
        let center = pts[i];
        let left_end = center + left * track.halfwidth_left[i];
        let right_end = center - left * track.halfwidth_right[i];
        let alpha = if cyclic || (i > 0 && i < n - 1) {
            signed_angle(pts[i] - pts[prev], pts[next] - pts[i])
        } else {
            0.0
        };
        normals.push(Normal {
            center,
            left_end,
            right_end,
            tangent,
            length_l: left_end.dist(right_end),
            theta: 0.0,
            alpha,
        });
    }
    let spacing = track.length() / if cyclic { n } else { n - 1 } as f64;
    Ok(NormalSet {
        boundary_left: normals.iter().map(|m| m.left_end).collect(),
        boundary_right: normals.iter().map(|m| m.right_end).collect(),
        normals,
        spacing,
        cyclic,
    })
}

fn normals_cross(a: &Normal, b: &Normal) -> Option<Point> {
    let (amin_x, amax_x) = minmax(a.left_end.x, a.right_end.x);
    let (bmin_x, bmax_x) = minmax(b.left_end.x, b.right_end.x);
    if amax_x < bmin_x || bmax_x < amin_x {
        return None;
    }
    let (amin_y, amax_y) = minmax(a.left_end.y, a.right_end.y);
    let (bmin_y, bmax_y) = minmax(b.left_end.y, b.right_end.y);
    if amax_y < bmin_y || bmax_y < amin_y {
        return None;
    }
    segment_intersection(a.left_end, a.right_end, b.left_end, b.right_end, 0.0)
        .map(|(t, _)| a.left_end.lerp(a.right_end, t))
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All intersecting pairs `(i, j, point)` with `i < j`.
pub fn intersecting_pairs(normals: &[Normal]) -> Vec<(usize, usize, Point)> {
    let mut out = Vec::new();
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            if let Some(p) = normals_cross(&normals[i], &normals[j]) {
                out.push((i, j, p));
            }
        }
    }
    out
}

/// Nearest crossing of the ray `origin + t*dir` (0 < t <= reach) with a polyline.
fn ray_hit(origin: Point, dir: Point, reach: f64, poly: &[Point], closed: bool) -> Option<Point> {
    let end = origin + dir * reach;
    let m = poly.len();
    let segs = if closed { m } else { m - 1 };
    let mut best: Option<f64> = None;
    for k in 0..segs {
        let (q0, q1) = (poly[k], poly[(k + 1) % m]);
        if let Some((t, _)) = segment_intersection(origin, end, q0, q1, 1e-12) {
            let t = t.clamp(0.0, 1.0);
            if t * reach > 1e-9 && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best.map(|t| origin + dir * (t * reach))
}

/// Re-aims normal `i` of `ns` at tilt `theta`, keeping its centre and
/// re-projecting both ends onto the track edges.
fn retilt(ns: &NormalSet, i: usize, theta: f64, max_tilt: f64) -> Normal {
    let base = &ns.normals[i];
    let half_left = base.center.dist(ns.boundary_left[i]);
    let half_right = base.center.dist(ns.boundary_right[i]);
    let mut n = *base;
    n.theta = theta;
    let u = n.left_dir();
    let stretch = 2.0 / max_tilt.max(theta.abs()).cos().max(0.1);
    n.left_end = ray_hit(n.center, u, stretch * half_left + 1.0, &ns.boundary_left, ns.cyclic)
        .unwrap_or(n.center + u * half_left);
    n.right_end = ray_hit(n.center, -u, stretch * half_right + 1.0, &ns.boundary_right, ns.cyclic)
        .unwrap_or(n.center - u * half_right);
    n.length_l = n.left_end.dist(n.right_end);
    n
}

/// Tilts intersecting normals into pseudo-normals until no two cross.
///
/// Greedy: while any pair intersects, the pair whose crossing lies deepest
/// (closest to both centres) has both members rotated away from each other
/// by `step`, up to `max_tilt`. Normals that never take part in a crossing
/// are returned untouched.
pub fn resolve_intersections(ns: &NormalSet, max_tilt: f64, step: f64) -> Result<NormalSet> {
    if !(step > 0.0) || !(max_tilt >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tilt step {step} and max tilt {max_tilt} must be positive"
        )));
    }
    let n = ns.len();
    let mut out = ns.clone();
    let budget = 4 * n * ((2.0 * max_tilt / step).ceil() as usize + 1);
    for _ in 0..budget {
        let mut pairs = intersecting_pairs(&out.normals);
        if pairs.is_empty() {
            return Ok(out);
        }
        let depth =
            |&(i, j, p): &(usize, usize, Point)| p.dist(out.normals[i].center).max(p.dist(out.normals[j].center));
        pairs.sort_by(|a, b| depth(a).total_cmp(&depth(b)).then((a.0, a.1).cmp(&(b.0, b.1))));

        let mut moved = false;
        for &(i, j, p) in &pairs {
            // `a` precedes `b` along the direction of travel.
            let (a, b) = if ns.cyclic && j - i > n / 2 { (j, i) } else { (i, j) };
            let na = out.normals[a];
            let left_side = (p - na.center).dot(na.left_dir()) >= 0.0;
            let sign = if left_side { 1.0 } else { -1.0 };
            let ta = (na.theta + sign * step).clamp(-max_tilt, max_tilt);
            let tb = (out.normals[b].theta - sign * step).clamp(-max_tilt, max_tilt);
            if ta == na.theta && tb == out.normals[b].theta {
                continue;
            }
            if ta != na.theta {
                out.normals[a] = retilt(ns, a, ta, max_tilt);
            }
            if tb != out.normals[b].theta {
                out.normals[b] = retilt(ns, b, tb, max_tilt);
            }
            moved = true;
            break;
        }
        if !moved {
            return Err(Error::Unresolvable { pairs: pairs.len() });
        }
    }
    Err(Error::Unresolvable {
        pairs: intersecting_pairs(&out.normals).len(),
    })
}

/// Point at fraction `w` from the left end towards the right end.
pub fn waypoint_to_world(n: &Normal, w: f64) -> Result<Point> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::OutOfRange(w));
    }
    Ok(Point::new(
        (1.0 - w) * n.left_end.x + w * n.right_end.x,
        (1.0 - w) * n.left_end.y + w * n.right_end.y,
    ))
}

/// Waypoint fraction where `line` crosses each normal.
///
/// `line` is treated as closed when `closed` is set. Crossings closer than
/// 1e-9 along a normal are merged (a polyline vertex on the normal).
pub fn project_line_to_waypoints(ns: &NormalSet, line: &[Point], closed: bool) -> Result<Vec<f64>> {
    let m = line.len();
    if m < 2 {
        return Err(Error::EmptyLine);
    }
    let segs = if closed { m } else { m - 1 };
    let mut out = Vec::with_capacity(ns.len());
    for (idx, n) in ns.normals.iter().enumerate() {
        let (nx0, nx1) = minmax(n.left_end.x, n.right_end.x);
        let (ny0, ny1) = minmax(n.left_end.y, n.right_end.y);
        let mut hits: Vec<f64> = Vec::new();
        for k in 0..segs {
            let (q0, q1) = (line[k], line[(k + 1) % m]);
            let (qx0, qx1) = minmax(q0.x, q1.x);
            let (qy0, qy1) = minmax(q0.y, q1.y);
            if qx1 < nx0 - 1e-9 || qx0 > nx1 + 1e-9 || qy1 < ny0 - 1e-9 || qy0 > ny1 + 1e-9 {
                continue;
            }
            if let Some((t, _)) = segment_intersection(n.left_end, n.right_end, q0, q1, 1e-9) {
                let t = t.clamp(0.0, 1.0);
                if !hits.iter().any(|&h| (h - t).abs() * n.length_l <= 1e-9) {
                    hits.push(t);
                }
            }
        }
        match hits.len() {
            0 => return Err(Error::NoIntersection { index: idx }),
            1 => out.push(hits[0]),
            count => return Err(Error::MultipleIntersections { index: idx, count }),
        }
    }
    Ok(out)
}

fn resample_points(points: &[Point], spacing: f64) -> Vec<Point> {
    let table = ArcTable::new(points, true);
    let count = ((table.total() / spacing).round() as usize).max(3);
    let step = table.total() / count as f64;
    let mut hint = 0;
    (0..count)
        .map(|k| {
            let (j, t) = table.locate(k as f64 * step, &mut hint);
            table.pts[j].lerp(table.pts[j + 1], t)
        })
        .collect()
}

fn nearest_on_polyline(p: Point, poly: &[Point]) -> Point {
    let m = poly.len();
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for k in 0..m {
        let (a, b) = (poly[k], poly[(k + 1) % m]);
        let ab = b - a;
        let len2 = ab.norm_sq();
        let t = if len2 > 0.0 {
            ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = a.lerp(b, t);
        let d = q.dist(p);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Rebuilds a centreline track from closed inner and outer edge polylines.
///
/// The outer edge is resampled densely; each sample is paired with its
/// nearest point on the inner edge, the centreline is the midpoint of each
/// pair and both half-widths are half the pair distance. The result follows
/// the point order of `outer`.
pub fn reconstruct_from_boundaries(inner: &[Point], outer: &[Point]) -> Result<Track> {
    if inner.len() < 3 || outer.len() < 3 {
        return Err(Error::DegenerateTrack("boundaries need at least 3 points each".into()));
    }
    for (i, j) in (0..inner.len()).map(|i| (i, (i + 1) % inner.len())) {
        for (k, l) in (0..outer.len()).map(|k| (k, (k + 1) % outer.len())) {
            if segment_intersection(inner[i], inner[j], outer[k], outer[l], 0.0).is_some() {
                return Err(Error::BoundariesCross);
            }
        }
    }
    if !point_in_polygon(inner[0], outer) {
        return Err(Error::BoundariesCross);
    }
    let perimeter = ArcTable::new(outer, true).total();
    let spacing = (perimeter / 200.0).min(1.0);
    let dense = resample_points(outer, spacing);

    let mut points: Vec<Point> = Vec::with_capacity(dense.len());
    let mut half: Vec<f64> = Vec::with_capacity(dense.len());
    for p in dense {
        let q = nearest_on_polyline(p, inner);
        let d = p.dist(q);
        if !(d > 1e-9) {
            return Err(Error::BoundariesCross);
        }
        let mid = p.lerp(q, 0.5);
        if points.last().is_some_and(|last| last.dist(mid) <= 1e-6) {
            continue;
        }
        points.push(mid);
        half.push(0.5 * d);
    }
    while points.len() > 1 && points[0].dist(*points.last().unwrap()) <= 1e-6 {
        points.pop();
        half.pop();
    }
    Track::new("reconstructed", points, half.clone(), half, true)
}
