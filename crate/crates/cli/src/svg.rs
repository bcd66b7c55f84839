//! SVG overlay of a track and its racing lines.

use std::fmt::Write;

use raceline_core::geometry::NormalSet;
use raceline_core::Point;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub colour: &'a str,
    pub points: &'a [Point],
    pub dashed: bool,
}

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Point>) -> Frame {
        let (mut lo, mut hi) = (
            Point::new(f64::INFINITY, f64::INFINITY),
            Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
        let scale = (WIDTH - 2.0 * MARGIN) / span;
        Frame {
            min_x: lo.x,
            max_y: hi.y,
            scale,
            // room below the plot for the legend
            height: (hi.y - lo.y) * scale + 2.0 * MARGIN + 40.0,
        }
    }

    // svg y grows downwards
    fn map(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min_x) * self.scale,
            MARGIN + (self.max_y - p.y) * self.scale,
        )
    }

    fn coords(&self, pts: &[Point], close: bool) -> String {
        let mut s = String::new();
        let mut it = pts.iter().chain(close.then(|| &pts[0]));
        if let Some(p) = it.next() {
            let (x, y) = self.map(*p);
            write!(s, "{x:.2},{y:.2}").unwrap();
        }
        for p in it {
            let (x, y) = self.map(*p);
            write!(s, " {x:.2},{y:.2}").unwrap();
        }
        s
    }
}

/// Boundaries as one path, each series as a polyline, then a legend.
pub fn overlay(ns: &NormalSet, series: &[Series]) -> String {
    let (left, right) = (&ns.boundary_left, &ns.boundary_right);
    let frame = Frame::fit(
        left.iter()
            .chain(right)
            .chain(series.iter().flat_map(|s| s.points))
            .copied(),
    );
    let close = ns.cyclic;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{:.0}" viewBox="0 0 {WIDTH} {:.0}">"#,
        frame.height, frame.height
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let z = if close { " Z" } else { "" };
    writeln!(
        out,
        r#"<path id="boundaries" fill="none" stroke="black" stroke-width="1" d="M {}{z} M {}{z}"/>"#,
        frame.coords(left, false).replace(' ', " L "),
        frame.coords(right, false).replace(' ', " L "),
    )
    .unwrap();
    for s in series {
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(
            out,
            r#"<polyline id="{}" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            s.label.to_lowercase().replace(' ', "-"),
            s.colour,
            frame.coords(s.points, close)
        )
        .unwrap();
    }
    writeln!(out, r#"<g id="legend" font-family="sans-serif" font-size="12">"#).unwrap();
    let entries = std::iter::once(("track boundaries", "black")).chain(series.iter().map(|s| (s.label, s.colour)));
    for (k, (label, colour)) in entries.enumerate() {
        let x = MARGIN + 170.0 * k as f64;
        let y = frame.height - 20.0;
        writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            x + 25.0,
            y + 4.0,
            escape(label)
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
