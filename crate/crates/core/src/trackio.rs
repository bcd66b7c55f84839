//! Text formats for tracks and racing lines.
//!
//! Tracks use the centreline-plus-widths layout of the public racetrack
//! database: `x_m,y_m,w_tr_right_m,w_tr_left_m`, one row per centreline
//! point, `#` comments allowed. Two comment directives are understood:
//! `# name: <name>` and `# open` (tracks are closed laps otherwise).
//!
//! Racing lines are written as `index,x_m,y_m,w_frac`. Every float is
//! printed with Rust's shortest round-trip representation, so parsing a
//! written file reproduces the values bit for bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::predictor::{LineSource, RacingLine};

/// Minimum distance between consecutive centreline points.
pub const MIN_POINT_SPACING: f64 = 1e-9;

/// A circuit described by its centreline and per-point half-widths.
///
/// `halfwidth_left` is measured to the left of the direction of travel.
/// Closed tracks wrap implicitly from the last point to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: String,
    pub points: Vec<Point>,
    pub halfwidth_left: Vec<f64>,
    pub halfwidth_right: Vec<f64>,
    pub closed: bool,
}

impl Track {
    /// Builds a track and checks its invariants.
    pub fn new(
        name: impl Into<String>,
        points: Vec<Point>,
        halfwidth_left: Vec<f64>,
        halfwidth_right: Vec<f64>,
        closed: bool,
    ) -> Result<Self> {
        let t = Track {
            name: name.into(),
            points,
            halfwidth_left,
            halfwidth_right,
            closed,
        };
        t.validate()?;
        Ok(t)
    }

    /// Track with the same half-widths on both sides.
    pub fn symmetric(name: impl Into<String>, points: Vec<Point>, halfwidth: f64, closed: bool) -> Result<Self> {
        let n = points.len();
        Self::new(name, points, vec![halfwidth; n], vec![halfwidth; n], closed)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.halfwidth_left.len() != n || self.halfwidth_right.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: self.halfwidth_left.len().min(self.halfwidth_right.len()),
            });
        }
        if n < 3 {
            return Err(Error::DegenerateTrack(format!("{n} points, need at least 3")));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::DegenerateTrack(format!("non-finite point {i}")));
            }
        }
        for i in 0..n {
            let (l, r) = (self.halfwidth_left[i], self.halfwidth_right[i]);
            if !(l > 0.0 && r > 0.0 && l.is_finite() && r.is_finite()) {
                return Err(Error::NonPositiveWidth { index: i });
            }
        }
        let pairs = if self.closed { n } else { n - 1 };
        for i in 0..pairs {
            let j = (i + 1) % n;
            if self.points[i].dist(self.points[j]) <= MIN_POINT_SPACING {
                return Err(Error::DegenerateTrack(format!("points {i} and {j} coincide")));
            }
        }
        Ok(())
    }

    /// Polyline length, including the closing segment of a closed track.
    pub fn length(&self) -> f64 {
        let n = self.points.len();
        let segs = if self.closed { n } else { n.saturating_sub(1) };
        (0..segs).map(|i| self.points[i].dist(self.points[(i + 1) % n])).sum()
    }
}

fn parse_field(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("{what} {:?} is not a number", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            line,
            reason: format!("{what} is not finite"),
        });
    }
    Ok(v)
}

/// Parses a track CSV. Row order is preserved; tracks are closed unless an
/// `# open` comment is present.
pub fn parse_track_csv(text: &str) -> Result<Track> {
    let mut name = String::from("track");
    let mut closed = true;
    let mut points = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if comment.eq_ignore_ascii_case("open") {
                closed = false;
            } else if let Some(n) = comment.strip_prefix("name:") {
                name = n.trim().to_string();
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedRow {
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let x = parse_field(fields[0], lineno, "x_m")?;
        let y = parse_field(fields[1], lineno, "y_m")?;
        let wr = parse_field(fields[2], lineno, "w_tr_right_m")?;
        let wl = parse_field(fields[3], lineno, "w_tr_left_m")?;
        points.push(Point::new(x, y));
        right.push(wr);
        left.push(wl);
    }
    if points.len() < 3 {
        return Err(Error::DegenerateTrack(format!(
            "{} rows, need at least 3",
            points.len()
        )));
    }
    Track::new(name, points, left, right, closed)
}

pub fn write_track_csv(track: &Track) -> String {
    let mut out = String::new();
    writeln!(out, "# name: {}", track.name).unwrap();
    if !track.closed {
        out.push_str("# open\n");
    }
    out.push_str("# x_m,y_m,w_tr_right_m,w_tr_left_m\n");
    for i in 0..track.points.len() {
        let p = track.points[i];
        writeln!(
            out,
            "{},{},{},{}",
            p.x, p.y, track.halfwidth_right[i], track.halfwidth_left[i]
        )
        .unwrap();
    }
    out
}

pub fn write_raceline_csv(line: &RacingLine) -> Result<String> {
    if line.w.is_empty() || line.points.len() != line.w.len() {
        return Err(Error::EmptyLine);
    }
    let mut out = String::new();
    writeln!(out, "# source: {}", line.source.as_str()).unwrap();
    out.push_str("# index,x_m,y_m,w_frac\n");
    for (i, (p, w)) in line.points.iter().zip(&line.w).enumerate() {
        writeln!(out, "{i},{},{},{}", p.x, p.y, w).unwrap();
    }
    Ok(out)
}

pub fn parse_raceline_csv(text: &str) -> Result<RacingLine> {
    let mut source = LineSource::External;
    let mut w = Vec::new();
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(s) = comment.trim().strip_prefix("source:") {
                source = LineSource::parse(s.trim()).unwrap_or(LineSource::External);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedRow {
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let index: usize = fields[0].trim().parse().map_err(|_| Error::MalformedRow {
            line: lineno,
            reason: "index is not a non-negative integer".into(),
        })?;
        if index != w.len() {
            return Err(Error::MalformedRow {
                line: lineno,
                reason: format!("index {index} out of sequence, expected {}", w.len()),
            });
        }
        let x = parse_field(fields[1], lineno, "x_m")?;
        let y = parse_field(fields[2], lineno, "y_m")?;
        let frac = parse_field(fields[3], lineno, "w_frac")?;
        points.push(Point::new(x, y));
        w.push(frac);
    }
    if w.is_empty() {
        return Err(Error::EmptyLine);
    }
    Ok(RacingLine { w, points, source })
}
