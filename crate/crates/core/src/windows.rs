//! Per-normal features and the sliding windows fed to the network.
//!
//! A window centred on normal `i` with foresight `f` holds the features of
//! normals `i-f ..= i+f`, normal-major and `(l, alpha, theta)`-minor, so its
//! feature vector has `3 * (2f + 1)` entries. Its `2s + 1` targets are the
//! waypoints of normals `i-s ..= i+s`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::NormalSet;

/// Reference length used to scale normal lengths into network inputs.
pub const L_REF: f64 = 30.0;

/// Layout tag stored in model files.
pub const FEATURE_ORDER: &str = "normal-major;l,alpha,theta;aft-to-fore";

pub const FEATURES_PER_NORMAL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub l_norm: f64,
    pub alpha: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub center_index: usize,
    pub features: Vec<f64>,
    /// Empty for inference windows.
    pub targets: Vec<f64>,
}

/// Size of the flat feature vector for foresight `f`.
pub fn feature_len(f: usize) -> usize {
    FEATURES_PER_NORMAL * (2 * f + 1)
}

pub fn encode_features(ns: &NormalSet, l_ref: f64) -> Result<Vec<FeatureRow>> {
    if !(l_ref > 0.0) {
        return Err(Error::InvalidConfig(format!("l_ref must be positive, got {l_ref}")));
    }
    Ok(ns
        .normals
        .iter()
        .map(|n| FeatureRow {
            l_norm: n.length_l / l_ref,
            alpha: n.alpha,
            theta: n.theta,
        })
        .collect())
}

/// Indices of the window centres that exist for `count` normals.
pub fn window_centers(count: usize, f: usize, cyclic: bool) -> Result<std::ops::Range<usize>> {
    let needed = 2 * f + 1;
    if count < needed {
        return Err(Error::TooShort { normals: count, needed });
    }
    Ok(if cyclic { 0..count } else { f..count - f })
}

/// Builds one window per admissible centre.
///
/// Closed tracks wrap around the start line; open tracks drop the centres
/// within `f` of either end. Pass an empty `targets` slice for inference.
pub fn make_windows(features: &[FeatureRow], targets: &[f64], f: usize, s: usize, cyclic: bool) -> Result<Vec<Window>> {
    if s > f {
        return Err(Error::InvalidConfig(format!("sampling s={s} exceeds foresight f={f}")));
    }
    let n = features.len();
    if !targets.is_empty() && targets.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: targets.len(),
        });
    }
    let centers = window_centers(n, f, cyclic)?;
    let idx = |i: usize, off: isize| -> usize { (i as isize + off).rem_euclid(n as isize) as usize };
    let (fi, si) = (f as isize, s as isize);
    let windows = centers
        .map(|i| {
            let mut feats = Vec::with_capacity(feature_len(f));
            for off in -fi..=fi {
                let r = features[idx(i, off)];
                feats.extend_from_slice(&[r.l_norm, r.alpha, r.theta]);
            }
            let tg = if targets.is_empty() {
                Vec::new()
            } else {
                (-si..=si).map(|off| targets[idx(i, off)]).collect()
            };
            Window {
                center_index: i,
                features: feats,
                targets: tg,
            }
        })
        .collect();
    Ok(windows)
}

/// Dataset text: a header comment with `f`, `s` and `l_ref`, then one
/// window per row as `center_index,f,s,features...,targets...`.
pub fn write_windows(windows: &[Window], f: usize, s: usize, l_ref: f64) -> String {
    let mut out = String::new();
    writeln!(out, "# f={f} s={s} l_ref={l_ref} order={FEATURE_ORDER}").unwrap();
    for w in windows {
        write!(out, "{},{f},{s}", w.center_index).unwrap();
        for v in w.features.iter().chain(&w.targets) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_windows(text: &str) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::MalformedRow { line: k + 1, reason };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(bad("missing header fields".into()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("{s:?} is not an integer")));
        let (center, f, s) = (int(fields[0])?, int(fields[1])?, int(fields[2])?);
        let nf = feature_len(f);
        let rest = &fields[3..];
        if rest.len() != nf && rest.len() != nf + 2 * s + 1 {
            return Err(bad(format!(
                "expected {nf} or {} values, found {}",
                nf + 2 * s + 1,
                rest.len()
            )));
        }
        let vals = rest
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("{v:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(Window {
            center_index: center,
            features: vals[..nf].to_vec(),
            targets: vals[nf..].to_vec(),
        });
    }
    Ok(out)
}
