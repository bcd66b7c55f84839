//! Full-lap inference.
//!
//! Every window of the lap goes through the network; window `i` output slot
//! `k` is a prediction for normal `i - s + k`. Each normal's waypoint is the
//! mean of the `2s + 1` predictions it receives, accumulated in ascending
//! window order so the result does not depend on how the windows were
//! scheduled.

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    build_normals, resample_centerline, resolve_intersections, NormalSet, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP,
};
use crate::network::MlpModel;
use crate::point::Point;
use crate::trackio::Track;
use crate::windows::{encode_features, make_windows};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSource {
    Predicted,
    Oracle,
    External,
}

impl LineSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LineSource::Predicted => "predicted",
            LineSource::Oracle => "oracle",
            LineSource::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "predicted" => Some(LineSource::Predicted),
            "oracle" => Some(LineSource::Oracle),
            "external" => Some(LineSource::External),
            _ => None,
        }
    }
}

/// Waypoint fractions on a normal set plus their world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RacingLine {
    pub w: Vec<f64>,
    pub points: Vec<Point>,
    pub source: LineSource,
}

impl RacingLine {
    pub fn from_waypoints(ns: &NormalSet, w: Vec<f64>, source: LineSource) -> Result<Self> {
        let points = ns.line_points(&w)?;
        Ok(Self { w, points, source })
    }
}

/// How window batches are scheduled. Results are bit-identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    Parallel,
}

const PARALLEL_CHUNK: usize = 32;

/// Keeps a vehicle of width `vehicle_width` fully on a normal of length `length_l`.
pub fn apply_vehicle_width(w: f64, length_l: f64, vehicle_width: f64) -> Result<f64> {
    if !(vehicle_width >= 0.0) || vehicle_width >= length_l {
        return Err(Error::WidthTooLarge {
            width: vehicle_width,
            length: length_l,
        });
    }
    let margin = vehicle_width / (2.0 * length_l);
    Ok(w.clamp(margin, 1.0 - margin))
}

/// Resample, build normals and repair them at the model's spacing.
pub fn normals_for(model: &MlpModel, track: &Track) -> Result<NormalSet> {
    let resampled = resample_centerline(track, model.meta.spacing)?;
    let ns = build_normals(&resampled)?;
    resolve_intersections(&ns, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP)
}

/// Network input rows for every window of `ns`, with the window centres.
pub fn window_inputs(model: &MlpModel, ns: &NormalSet) -> Result<(Array2<f64>, Vec<usize>)> {
    let feats = encode_features(ns, model.meta.l_ref)?;
    let windows = make_windows(&feats, &[], model.meta.f, model.meta.s, ns.cyclic)?;
    let width = model.input_len();
    let mut x = Array2::zeros((windows.len(), width));
    for (row, w) in x.rows_mut().into_iter().zip(&windows) {
        row.into_slice().unwrap().copy_from_slice(&w.features);
    }
    Ok((x, windows.iter().map(|w| w.center_index).collect()))
}

pub fn evaluate_windows(model: &MlpModel, x: ArrayView2<f64>, exec: Execution) -> Result<Array2<f64>> {
    match exec {
        Execution::Serial => model.forward_batch(x),
        Execution::Parallel => {
            let rows = x.nrows();
            let starts: Vec<usize> = (0..rows).step_by(PARALLEL_CHUNK).collect();
            let parts = starts
                .par_iter()
                .map(|&a| model.forward_batch(x.slice(s![a..(a + PARALLEL_CHUNK).min(rows), ..])))
                .collect::<Result<Vec<_>>>()?;
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            if views.is_empty() {
                return Ok(Array2::zeros((0, model.output_len())));
            }
            ndarray::concatenate(Axis(0), &views).map_err(|e| Error::ShapeMismatch(e.to_string()))
        }
    }
}

/// Mean of all predictions each normal receives from the window outputs.
///
/// Normals that receive none (the ends of an open track) copy the nearest
/// covered normal.
pub fn average_window_outputs(outputs: ArrayView2<f64>, centers: &[usize], n: usize, cyclic: bool) -> Vec<f64> {
    let slots = outputs.ncols();
    let s = (slots / 2) as isize;
    let mut acc = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (row, &c) in outputs.rows().into_iter().zip(centers) {
        for (k, &v) in row.iter().enumerate() {
            let j = c as isize - s + k as isize;
            let j = if cyclic {
                j.rem_euclid(n as isize) as usize
            } else if j < 0 || j >= n as isize {
                continue;
            } else {
                j as usize
            };
            acc[j] += v;
            count[j] += 1;
        }
    }
    finish_mean(acc, count)
}

/// Line assembled from only the central output slot of each window, as a
/// single-output network would produce it.
pub fn central_outputs(outputs: ArrayView2<f64>, centers: &[usize], n: usize) -> Vec<f64> {
    let mid = outputs.ncols() / 2;
    let mut acc = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (row, &c) in outputs.rows().into_iter().zip(centers) {
        acc[c] += row[mid];
        count[c] += 1;
    }
    finish_mean(acc, count)
}

fn finish_mean(acc: Vec<f64>, count: Vec<usize>) -> Vec<f64> {
    let n = acc.len();
    let mut out: Vec<Option<f64>> = acc
        .iter()
        .zip(&count)
        .map(|(&a, &c)| (c > 0).then(|| a / c as f64))
        .collect();
    if let Some(first) = out.iter().position(Option::is_some) {
        let last = out.iter().rposition(Option::is_some).unwrap();
        let (head, tail) = (out[first], out[last]);
        out[..first].iter_mut().for_each(|v| *v = head);
        out[last + 1..].iter_mut().for_each(|v| *v = tail);
    }
    out.into_iter().map(|v| v.unwrap_or(0.5)).take(n).collect()
}

/// Predicts waypoints on an existing normal set.
pub fn predict_on_normals(model: &MlpModel, ns: &NormalSet, vehicle_width: f64, exec: Execution) -> Result<RacingLine> {
    model.validate().map_err(|e| Error::IncompatibleModel(e.to_string()))?;
    if let Some(n) = ns.normals.iter().find(|n| vehicle_width >= n.length_l) {
        return Err(Error::WidthTooLarge {
            width: vehicle_width,
            length: n.length_l,
        });
    }
    let (x, centers) = window_inputs(model, ns)?;
    let outputs = evaluate_windows(model, x.view(), exec)?;
    let mean = average_window_outputs(outputs.view(), &centers, ns.len(), ns.cyclic);
    let w = mean
        .iter()
        .zip(&ns.normals)
        .map(|(&w, n)| apply_vehicle_width(w, n.length_l, vehicle_width))
        .collect::<Result<Vec<f64>>>()?;
    RacingLine::from_waypoints(ns, w, LineSource::Predicted)
}

/// Full pipeline from a raw track: resample, normals, repair, windows,
/// network, averaging and vehicle-width clamp. Runs single-threaded.
pub fn predict_line(model: &MlpModel, track: &Track, vehicle_width: f64) -> Result<RacingLine> {
    Ok(predict_line_with(model, track, vehicle_width, Execution::Serial)?.1)
}

pub fn predict_line_with(
    model: &MlpModel,
    track: &Track,
    vehicle_width: f64,
    exec: Execution,
) -> Result<(NormalSet, RacingLine)> {
    if !(vehicle_width >= 0.0) {
        return Err(Error::WidthTooLarge {
            width: vehicle_width,
            length: 0.0,
        });
    }
    model.validate().map_err(|e| Error::IncompatibleModel(e.to_string()))?;
    if !(model.meta.spacing > 0.0) || !(model.meta.l_ref > 0.0) {
        return Err(Error::IncompatibleModel(
            "model spacing and l_ref must be positive".into(),
        ));
    }
    let ns = normals_for(model, track)?;
    let line = predict_on_normals(model, &ns, vehicle_width, exec)?;
    Ok((ns, line))
}
