use std::ops::{Add, Mul, Neg, Sub};

/// Planar point or vector in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Point) -> f64 {
        (o - self).norm()
    }

    /// Rotated by +90 degrees (counterclockwise).
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + t * (o.x - self.x), self.y + t * (o.y - self.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Mirror about the x-axis.
    pub fn mirror_y(self) -> Point {
        Point::new(self.x, -self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Signed angle in (-pi, pi] turning `a` onto `b`.
pub fn signed_angle(a: Point, b: Point) -> f64 {
    let ang = a.cross(b).atan2(a.dot(b));
    if ang == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        ang
    }
}

/// Intersection of segments `p0-p1` and `q0-q1`.
///
/// Returns the parameters `(t, u)` along each segment when they meet, with
/// both parameters in `[-eps, 1 + eps]`. Parallel segments return `None`
/// unless they are collinear and overlap, in which case the overlap start
/// is reported.
pub fn segment_intersection(p0: Point, p1: Point, q0: Point, q1: Point, eps: f64) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    let qp = q0 - p0;
    let scale = r.norm() * s.norm();
    if denom.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        // parallel
        if qp.cross(r).abs() > 1e-12 * r.norm().max(1.0) * qp.norm().max(1.0) {
            return None;
        }
        let rr = r.norm_sq();
        if rr == 0.0 {
            return None;
        }
        let t0 = qp.dot(r) / rr;
        let t1 = (q1 - p0).dot(r) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi < -eps || lo > 1.0 + eps {
            return None;
        }
        let t = lo.max(0.0);
        let u = if t1 != t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        return Some((t, u));
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if t >= -eps && t <= 1.0 + eps && u >= -eps && u <= 1.0 + eps {
        Some((t, u))
    } else {
        None
    }
}

/// Signed area by the shoelace formula; positive for counterclockwise loops.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}
