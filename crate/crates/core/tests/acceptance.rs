//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! The tests share one lock so that timing-sensitive checks are not
//! disturbed by other tests running on the same cores.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raceline_core::dataset::{
    augment_track, flip_window, flipped, reverse_window, reversed, reversed_index, AugmentSpec,
};
use raceline_core::evaluation::{lateral_errors, median, roughness, summary_metrics};
use raceline_core::geometry::{
    build_normals, intersecting_pairs, project_line_to_waypoints, resample_centerline, resolve_intersections,
    NormalSet, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP,
};
use raceline_core::network::{
    load_model, nadam_step, save_model, train, Layer, MlpModel, ModelMeta, NadamState, TrainConfig,
};
use raceline_core::oracle::{curvature_objective, generate_targets, mcp_solve, OracleConfig};
use raceline_core::point::{segment_intersection, Point};
use raceline_core::predictor::{
    average_window_outputs, central_outputs, evaluate_windows, normals_for, predict_line, predict_line_with,
    window_inputs, Execution, LineSource, RacingLine,
};
use raceline_core::synth::{hairpin_square, oval_track, random_corpus, rounded_polygon, RandomTrackConfig};
use raceline_core::trackio::{parse_raceline_csv, parse_track_csv, write_raceline_csv, write_track_csv, Track};
use raceline_core::windows::{encode_features, make_windows, Window, L_REF};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "[{}] criterion {id:>2} {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

// ---------------------------------------------------------------- 1

fn loss_of(model: &MlpModel, x: &[f64], y: &[f64], delta: f64) -> f64 {
    let xa = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
    let ya = Array2::from_shape_vec((1, y.len()), y.to_vec()).unwrap();
    model.loss_batch(xa.view(), ya.view(), delta).unwrap()
}

#[test]
fn backprop_agrees_with_finite_differences_on_random_nets() {
    let _g = serial();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let f = rng.random_range(0..=1usize);
        let s = rng.random_range(0..=1usize);
        let hidden = [
            rng.random_range(2..=8usize),
            rng.random_range(2..=6usize),
            rng.random_range(2..=4usize),
        ];
        let mut model = MlpModel::new(ModelMeta::new(f, s), &hidden, seed).unwrap();
        for l in &mut model.layers {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x: Vec<f64> = (0..model.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..model.output_len()).map(|_| rng.random_range(0.0..1.0)).collect();
        // half the nets put some residuals on the linear branch of the loss
        let delta = if seed % 2 == 0 { 1.0 } else { 0.05 };
        let (_, grads) = model.backward(&x, &y, delta).unwrap();
        let h = 1e-5;
        for k in 0..model.layers.len() {
            let n_w = model.layers[k].weights.len();
            for idx in 0..n_w + model.layers[k].bias.len() {
                let analytic = if idx < n_w {
                    grads.layers[k].weights.as_slice().unwrap()[idx]
                } else {
                    grads.layers[k].bias[idx - n_w]
                };
                let bump = |d: f64| {
                    let mut m = model.clone();
                    let l: &mut Layer = &mut m.layers[k];
                    if idx < n_w {
                        l.weights.as_slice_mut().unwrap()[idx] += d;
                    } else {
                        l.bias[idx - n_w] += d;
                    }
                    loss_of(&m, &x, &y, delta)
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst < 1e-4 && secs < 10.0;
    report(
        1,
        "gradient correctness",
        ok,
        &format!("{checked} parameters over 10 nets, max relative error {worst:.2e}, {secs:.2} s"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 2

/// Scalar transcription of the Nesterov-accelerated Adam update.
fn reference_nadam(theta: f64, m: f64, v: f64, t: u64, g: f64, lr: f64) -> (f64, f64, f64) {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let m = b1 * m + (1.0 - b1) * g;
    let v = b2 * v + (1.0 - b2) * g * g;
    let m_hat = b1 * m / (1.0 - b1.powi(t as i32 + 1)) + (1.0 - b1) * g / (1.0 - b1.powi(t as i32));
    let v_hat = v / (1.0 - b2.powi(t as i32));
    (theta - lr * m_hat / (v_hat.sqrt() + eps), m, v)
}

#[test]
fn nadam_matches_reference_equations_and_converges() {
    let _g = serial();
    let start = Instant::now();
    let cfg = TrainConfig::default();
    let mut state = NadamState::new(1);
    let mut p = [1.0];
    let (mut theta, mut m, mut v) = (1.0, 0.0, 0.0);
    let mut worst: f64 = 0.0;
    for t in 1..=100u64 {
        let g = [p[0]];
        nadam_step(&mut state, &mut p, &g, &cfg).unwrap();
        (theta, m, v) = reference_nadam(theta, m, v, t, theta, cfg.learning_rate);
        worst = worst.max((p[0] - theta).abs());
    }

    let fast = TrainConfig {
        learning_rate: 0.01,
        ..cfg
    };
    let mut state = NadamState::new(1);
    let mut p = [1.0];
    for _ in 0..500 {
        let g = [p[0]];
        nadam_step(&mut state, &mut p, &g, &fast).unwrap();
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst < 1e-10 && p[0].abs() < 1e-3 && secs < 1.0;
    report(
        2,
        "optimizer equivalence",
        ok,
        &format!(
            "100-step max deviation {worst:.1e}; |theta| after 500 steps at lr 0.01 = {:.2e}; {secs:.3} s",
            p[0].abs()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 3

fn geometry_corpus() -> Vec<(Track, f64)> {
    let mut out = Vec::new();
    for (side, r, hw) in [(120.0, 4.0, 6.0), (80.0, 3.0, 6.0), (150.0, 5.0, 7.0)] {
        let t = hairpin_square(&format!("square{side}"), side, r, hw).unwrap();
        out.push((t.clone(), 5.0));
        out.push((t, 2.0));
    }
    for apex in [60.0f64, 45.0, 35.0] {
        let h = 200.0 * (apex / 2.0).to_radians().tan();
        let v = [Point::new(0.0, 0.0), Point::new(200.0, -h), Point::new(200.0, h)];
        let t = rounded_polygon(&format!("spike{apex}"), &v, 4.0, 6.0, 1.0).unwrap();
        out.push((t.clone(), 5.0));
        out.push((t, 2.0));
    }
    for t in random_corpus("smooth", 6, 11, &RandomTrackConfig::default()).unwrap() {
        out.push((t, 5.0));
    }
    for t in random_corpus("compact", 6, 12, &RandomTrackConfig::compact()).unwrap() {
        out.push((reversed(&flipped(&t)), 5.0));
    }
    out
}

fn brute_force_crossings(ns: &NormalSet) -> usize {
    let n = ns.len();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&ns.normals[i], &ns.normals[j]);
            if segment_intersection(a.left_end, a.right_end, b.left_end, b.right_end, 0.0).is_some() {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn repaired_normals_never_cross_and_laps_turn_once() {
    let _g = serial();
    let start = Instant::now();
    let corpus = geometry_corpus();
    let mut hairpins = 0;
    let mut crossings_before = 0;
    let mut crossings_after = 0;
    let mut worst_turn: f64 = 0.0;
    for (t, spacing) in &corpus {
        let ns = build_normals(&resample_centerline(t, *spacing).unwrap()).unwrap();
        let min_half = t
            .halfwidth_left
            .iter()
            .chain(&t.halfwidth_right)
            .fold(f64::INFINITY, |m, w| m.min(*w));
        if t.name.starts_with("square") || t.name.starts_with("spike") {
            // these corners are filleted to a radius below the half-width
            assert!(min_half > 5.0 - 2.0);
            hairpins += 1;
        }
        crossings_before += intersecting_pairs(&ns.normals).len();
        let fixed = resolve_intersections(&ns, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP).unwrap();
        crossings_after += brute_force_crossings(&fixed);
        let total: f64 = fixed.normals.iter().map(|n| n.alpha).sum();
        worst_turn = worst_turn.max((total.abs() - std::f64::consts::TAU).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = corpus.len() >= 20 && hairpins > 0 && crossings_after == 0 && worst_turn < 1e-6 && secs < 30.0;
    report(
        3,
        "geometry soundness",
        ok,
        &format!(
            "{} laps ({hairpins} with hairpins), crossing pairs {crossings_before} -> {crossings_after}, max |sum alpha - 2pi| {worst_turn:.1e}, {secs:.2} s",
            corpus.len()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 4

/// Exact minimum of the cyclic curvature objective over a lattice of
/// waypoint levels, by dynamic programming over consecutive pairs.
#[allow(clippy::needless_range_loop)]
fn lattice_minimum(ns: &NormalSet, levels: &[f64]) -> f64 {
    let n = ns.len();
    let k = levels.len();
    let pts: Vec<Vec<Point>> = ns
        .normals
        .iter()
        .map(|nm| {
            levels
                .iter()
                .map(|&w| nm.left_end * (1.0 - w) + nm.right_end * w)
                .collect()
        })
        .collect();
    let kappa2 = |i: usize, a: usize, b: usize, c: usize| -> f64 {
        let (p, q, r) = (pts[(i + n - 1) % n][a], pts[i][b], pts[(i + 1) % n][c]);
        let cr = (q - p).cross(r - p);
        let d = (q - p).norm_sq() * (r - q).norm_sq() * (r - p).norm_sq();
        if d > 0.0 {
            4.0 * cr * cr / d
        } else {
            0.0
        }
    };
    let mut best = f64::INFINITY;
    for a0 in 0..k {
        for a1 in 0..k {
            // cost[x][y]: best sum of terms 1..i-1 with w_{i-1} = x, w_i = y
            let mut cost = vec![vec![f64::INFINITY; k]; k];
            cost[a0][a1] = 0.0;
            for i in 1..n - 1 {
                let mut next = vec![vec![f64::INFINITY; k]; k];
                for x in 0..k {
                    for y in 0..k {
                        if cost[x][y].is_finite() {
                            for z in 0..k {
                                let c = cost[x][y] + kappa2(i, x, y, z);
                                if c < next[y][z] {
                                    next[y][z] = c;
                                }
                            }
                        }
                    }
                }
                cost = next;
            }
            for x in 0..k {
                for y in 0..k {
                    if cost[x][y].is_finite() {
                        let close = kappa2(n - 1, x, y, a0) + kappa2(0, y, a0, a1);
                        best = best.min(cost[x][y] + close);
                    }
                }
            }
        }
    }
    best
}

fn brute_force_minimum(ns: &NormalSet, levels: &[f64]) -> f64 {
    let n = ns.len();
    let k = levels.len();
    let mut best = f64::INFINITY;
    let mut digits = vec![0usize; n];
    loop {
        let w: Vec<f64> = digits.iter().map(|&d| levels[d]).collect();
        best = best.min(curvature_objective(ns, &w).unwrap());
        let mut i = 0;
        while i < n {
            digits[i] += 1;
            if digits[i] < k {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn small_oval(normals: usize) -> NormalSet {
    let t = oval_track("oval", 30.0, 12.0, 3.0, 0.5).unwrap();
    let spacing = t.length() / normals as f64;
    let ns = build_normals(&resample_centerline(&t, spacing).unwrap()).unwrap();
    assert_eq!(ns.len(), normals);
    resolve_intersections(&ns, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP).unwrap()
}

fn annulus_normals() -> NormalSet {
    let pts = (0..720)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 720.0;
            Point::new(50.0 * a.cos(), 50.0 * a.sin())
        })
        .collect();
    let t = Track::symmetric("annulus", pts, 5.0, true).unwrap();
    build_normals(&resample_centerline(&t, 5.0).unwrap()).unwrap()
}

#[test]
fn minimum_curvature_oracle_finds_known_optima() {
    let _g = serial();
    let start = Instant::now();
    let cfg = OracleConfig::default();

    let ring = annulus_normals();
    let w = mcp_solve(&ring, &cfg).unwrap();
    let target = 1.0 - cfg.margin;
    let ring_dev = w.iter().map(|x| (x - target).abs()).sum::<f64>() / w.len() as f64;

    // the dynamic programme must agree with true enumeration first
    let levels3 = [0.0, 0.5, 1.0];
    let tiny = small_oval(8);
    let dp_small = lattice_minimum(&tiny, &levels3);
    let brute_small = brute_force_minimum(&tiny, &levels3);
    let dp_exact = (dp_small - brute_small).abs() <= 1e-12 * brute_small.max(1e-300);

    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let oval = small_oval(12);
    let lattice = lattice_minimum(&oval, &levels);
    let mcp = curvature_objective(&oval, &mcp_solve(&oval, &cfg).unwrap()).unwrap();
    let ratio = mcp / lattice;
    let secs = start.elapsed().as_secs_f64();

    let ok = ring_dev < 0.05 && dp_exact && ratio <= 1.05 && secs < 60.0;
    report(
        4,
        "oracle sanity",
        ok,
        &format!(
            "annulus mean |w - {target}| = {ring_dev:.2e}; 12-normal oval MCP {mcp:.6} vs lattice {lattice:.6} (ratio {ratio:.4}); DP = enumeration on 3^8: {dp_exact}; {secs:.2} s"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 5

fn pipeline(t: &Track) -> (NormalSet, Vec<f64>) {
    generate_targets(t, &OracleConfig::default(), 5.0).unwrap()
}

fn windows_for(ns: &NormalSet, w: &[f64], f: usize, s: usize) -> Vec<Window> {
    make_windows(&encode_features(ns, L_REF).unwrap(), w, f, s, ns.cyclic).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn flip_and_reverse_transform_features_and_targets_exactly() {
    let _g = serial();
    let mut tracks = random_corpus("xf", 4, 21, &RandomTrackConfig::compact()).unwrap();
    tracks.push(hairpin_square("hp", 100.0, 4.0, 6.0).unwrap());
    let (f, s) = (6, 2);
    let mut flip_feature_bits = true;
    let mut flip_target_map = true;
    let mut rev_feature_dev: f64 = 0.0;
    let mut rev_target_map = true;
    let mut involution_dev: f64 = 0.0;
    let mut oracle_flip_dev: f64 = 0.0;
    let mut projected_flip_dev: f64 = 0.0;
    for t in &tracks {
        let (ns, w) = pipeline(t);
        let n = ns.len();
        let base = windows_for(&ns, &w, f, s);

        // mirrored track: the window map must reproduce its features bit for bit
        let (ns_f, w_f) = pipeline(&flipped(t));
        let mirrored_targets: Vec<f64> = w.iter().map(|x| 1.0 - x).collect();
        let direct = windows_for(&ns_f, &mirrored_targets, f, s);
        for (a, b) in base.iter().zip(&direct) {
            let m = flip_window(a);
            flip_feature_bits &= m.features == b.features;
            flip_target_map &= m.targets.iter().zip(&a.targets).all(|(x, y)| *x == 1.0 - y);
        }
        oracle_flip_dev = oracle_flip_dev.max(max_abs_diff(&w_f, &mirrored_targets));
        let mirrored_line: Vec<Point> = ns.line_points(&w).unwrap().iter().map(|p| p.mirror_y()).collect();
        let projected = project_line_to_waypoints(&ns_f, &mirrored_line, true).unwrap();
        projected_flip_dev = projected_flip_dev.max(max_abs_diff(&projected, &mirrored_targets));

        // reversed lap: rows reverse, turning angles negate, waypoints swap sides
        let (ns_r, _) = pipeline(&reversed(t));
        assert_eq!(ns_r.len(), n);
        let rev_targets: Vec<f64> = (0..n).map(|j| 1.0 - w[reversed_index(j, n, true)]).collect();
        let direct = windows_for(&ns_r, &rev_targets, f, s);
        for a in &base {
            let r = reverse_window(a, n);
            let b = &direct[r.center_index];
            rev_feature_dev = rev_feature_dev.max(max_abs_diff(&r.features, &b.features));
            rev_target_map &= r.targets == b.targets;
        }

        for a in &base {
            let ff = flip_window(&flip_window(a));
            let rr = reverse_window(&reverse_window(a, n), n);
            involution_dev = involution_dev
                .max(max_abs_diff(&ff.features, &a.features))
                .max(max_abs_diff(&ff.targets, &a.targets))
                .max(max_abs_diff(&rr.features, &a.features))
                .max(max_abs_diff(&rr.targets, &a.targets));
        }
        let tf = flipped(&flipped(t));
        let tr = reversed(&reversed(t));
        for other in [&tf, &tr] {
            involution_dev = involution_dev.max(raceline_core::dataset::track_distance(other, t).unwrap());
        }
    }
    let ok = flip_feature_bits
        && flip_target_map
        && rev_target_map
        && rev_feature_dev <= 1e-12
        && involution_dev <= 1e-12
        && projected_flip_dev <= 1e-12
        && oracle_flip_dev <= 0.01;
    report(
        5,
        "transform exactness",
        ok,
        &format!(
            "flip features bitwise {flip_feature_bits}, flip targets 1-w {flip_target_map}; reverse feature deviation {rev_feature_dev:.1e}, reverse targets exact {rev_target_map}; involutions {involution_dev:.1e}; mirrored line projects to 1-w within {projected_flip_dev:.1e}; re-solved oracle within {oracle_flip_dev:.1e}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- shared corpus for 6 and 7

struct Corpus {
    train: Vec<(NormalSet, Vec<f64>)>,
    test: Vec<Track>,
    build_seconds: f64,
}

const TRAIN_TRACKS: usize = 300;
const TEST_TRACKS: usize = 20;

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let start = Instant::now();
        let cfg = RandomTrackConfig::compact();
        let spec = AugmentSpec {
            scales: vec![0.9, 1.0, 1.1],
            flip: true,
            reverse: true,
        };
        let mut train = Vec::new();
        for t in random_corpus("train", TRAIN_TRACKS, 1, &cfg).unwrap() {
            for a in augment_track(&t, &spec).unwrap() {
                train.push(pipeline(&a.track));
            }
        }
        let test = random_corpus("held", TEST_TRACKS, 1001, &cfg).unwrap();
        Corpus {
            train,
            test,
            build_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn train_windows(c: &Corpus, f: usize, s: usize) -> Vec<Window> {
    c.train.iter().flat_map(|(ns, w)| windows_for(ns, w, f, s)).collect()
}

// ---------------------------------------------------------------- 6

#[test]
fn output_averaging_smooths_every_held_out_line() {
    let _g = serial();
    let start = Instant::now();
    let c = corpus();
    let (f, s) = (10, 4);
    let windows: Vec<Window> = train_windows(c, f, s).into_iter().step_by(4).collect();
    let mut model = MlpModel::new(ModelMeta::new(f, s), &[64, 32, 32], 6).unwrap();
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 64,
        epochs: 10,
        seed: 6,
        ..Default::default()
    };
    train(&mut model, &windows, &cfg).unwrap();

    let mut worst_ratio: f64 = 0.0;
    let mut all_smoother = true;
    for t in &c.test {
        let ns = normals_for(&model, t).unwrap();
        let (x, centers) = window_inputs(&model, &ns).unwrap();
        let out = evaluate_windows(&model, x.view(), Execution::Serial).unwrap();
        let averaged = average_window_outputs(out.view(), &centers, ns.len(), true);
        let single = central_outputs(out.view(), &centers, ns.len());
        let (ra, rs) = (roughness(&averaged, true), roughness(&single, true));
        all_smoother &= ra <= rs;
        worst_ratio = worst_ratio.max(ra / rs);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "smoothing effect",
        all_smoother,
        &format!(
            "{} held-out tracks, worst roughness ratio s=4 / s=0 = {worst_ratio:.3}; {secs:.1} s",
            c.test.len()
        ),
    );
    assert!(all_smoother);
}

// ---------------------------------------------------------------- 7

#[test]
fn desk_scale_network_beats_half_the_centreline_error() {
    let _g = serial();
    let start = Instant::now();
    let c = corpus();
    let (f, s) = (10, 2);
    let windows = train_windows(c, f, s);
    let mut model = MlpModel::new(ModelMeta::new(f, s), &[64, 32, 32], 0).unwrap();
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 64,
        epochs: 40,
        seed: 0,
        ..Default::default()
    };
    train(&mut model, &windows, &cfg).unwrap();

    let mut errors = Vec::new();
    let mut baseline = Vec::new();
    for t in &c.test {
        let (ns, w) = pipeline(t);
        let reference = RacingLine::from_waypoints(&ns, w, LineSource::Oracle).unwrap();
        let (ns_p, pred) = predict_line_with(&model, t, 0.0, Execution::Serial).unwrap();
        assert_eq!(ns_p, ns);
        let centre = RacingLine::from_waypoints(&ns, vec![0.5; ns.len()], LineSource::External).unwrap();
        errors.extend(lateral_errors(&pred, &reference, &ns).unwrap());
        baseline.extend(lateral_errors(&centre, &reference, &ns).unwrap());
    }
    let m = summary_metrics(&errors).unwrap();
    let b = summary_metrics(&baseline).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = m.mae <= 0.5 * b.mae && m.mae < 1.0 && secs < 15.0 * 60.0;
    report(
        7,
        "end-to-end learning",
        ok,
        &format!(
            "{} training laps ({} windows), {} held-out laps: MAE {:.3} m vs centreline {:.3} m (ratio {:.3}), RMSE {:.3} m; corpus {:.1} s, total {secs:.0} s",
            c.train.len(),
            windows.len(),
            c.test.len(),
            m.mae,
            b.mae,
            m.mae / b.mae,
            m.rmse,
            c.build_seconds
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 8

fn circuit_of_normals(normals: usize) -> Track {
    let t = raceline_core::synth::random_track("bench", 8, &RandomTrackConfig::default()).unwrap();
    let k = normals as f64 * 5.0 / t.length();
    raceline_core::dataset::scaled(&t, k)
}

#[test]
fn full_size_prediction_meets_latency_budget() {
    let _g = serial();
    let model = MlpModel::with_default_architecture(ModelMeta::new(70, 4), 8).unwrap();
    let track = circuit_of_normals(300);
    let warm = predict_line(&model, &track, 0.0).unwrap();
    let reps = 21;
    let mut full = Vec::with_capacity(reps);
    let mut front = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        let ns = normals_for(&model, &track).unwrap();
        let (x, _) = window_inputs(&model, &ns).unwrap();
        front.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(x);
        let t0 = Instant::now();
        let line = predict_line(&model, &track, 0.0).unwrap();
        full.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(line);
    }
    let (full_ms, front_ms) = (median(&mut full) * 1e3, median(&mut front) * 1e3);
    let ok = warm.w.len() == 300 && full_ms < 100.0 && front_ms < 20.0;
    report(
        8,
        "latency",
        ok,
        &format!(
            "{} normals, layers {:?}: predict_line median {full_ms:.1} ms, geometry+windows median {front_ms:.2} ms (single thread, {reps} runs)",
            warm.w.len(),
            model.layer_sizes()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 9

fn small_dataset(seed: u64) -> Vec<Window> {
    let mut out = Vec::new();
    for t in random_corpus("det", 3, seed, &RandomTrackConfig::compact()).unwrap() {
        for a in augment_track(&t, &AugmentSpec::default()).unwrap() {
            let (ns, w) = pipeline(&a.track);
            out.extend(windows_for(&ns, &w, 5, 2));
        }
    }
    out
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn seeded_runs_and_file_round_trips_are_bit_exact() {
    let _g = serial();
    let d1 = small_dataset(5);
    let d2 = small_dataset(5);
    let datasets_equal = d1.len() == d2.len()
        && d1
            .iter()
            .zip(&d2)
            .all(|(a, b)| bits(&a.features) == bits(&b.features) && bits(&a.targets) == bits(&b.targets));

    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 32,
        seed: 9,
        ..Default::default()
    };
    let fit = || {
        let mut m = MlpModel::new(ModelMeta::new(5, 2), &[24, 12, 12], 4).unwrap();
        train(&mut m, &d1, &cfg).unwrap();
        m
    };
    let (m1, m2) = (fit(), fit());
    let models_equal = save_model(&m1) == save_model(&m2);

    let track = random_corpus("probe", 1, 77, &RandomTrackConfig::compact())
        .unwrap()
        .remove(0);
    let (_, serial_line) = predict_line_with(&m1, &track, 1.0, Execution::Serial).unwrap();
    let (_, again) = predict_line_with(&m2, &track, 1.0, Execution::Serial).unwrap();
    let (_, parallel_line) = predict_line_with(&m1, &track, 1.0, Execution::Parallel).unwrap();
    let predictions_equal = bits(&serial_line.w) == bits(&again.w);
    let parallel_equal = bits(&serial_line.w) == bits(&parallel_line.w);

    let loaded = load_model(&save_model(&m1)).unwrap();
    let (_, reloaded_line) = predict_line_with(&loaded, &track, 1.0, Execution::Serial).unwrap();
    let model_round_trip = loaded == m1 && bits(&reloaded_line.w) == bits(&serial_line.w);

    let track_round_trip = parse_track_csv(&write_track_csv(&track)).unwrap() == track;
    let line_round_trip = parse_raceline_csv(&write_raceline_csv(&serial_line).unwrap()).unwrap() == serial_line;

    let ok = datasets_equal
        && models_equal
        && predictions_equal
        && parallel_equal
        && model_round_trip
        && track_round_trip
        && line_round_trip;
    report(
        9,
        "determinism and round-trips",
        ok,
        &format!(
            "dataset {datasets_equal} ({} windows), model {models_equal}, prediction {predictions_equal}, parallel {parallel_equal}, model file {model_round_trip}, track file {track_round_trip}, raceline file {line_round_trip}",
            d1.len()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 10

#[test]
fn error_metrics_obey_their_algebra() {
    let _g = serial();
    let mut runner = TestRunner::new(PropConfig {
        cases: 2000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let ordering = runner.run(&prop::collection::vec(-20.0f64..20.0, 1..400), |e| {
        let m = summary_metrics(&e).unwrap();
        prop_assert!(m.rmse >= m.mae);
        prop_assert!(m.mae >= m.mean_error.abs());
        prop_assert!(m.ci50 <= m.ci95);
        Ok(())
    });
    let mut runner = TestRunner::new(PropConfig {
        cases: 2000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let constant = runner.run(&(-20.0f64..20.0, 1usize..1000), |(c, n)| {
        let m = summary_metrics(&vec![c; n]).unwrap();
        prop_assert_eq!(m.rmse, c.abs());
        prop_assert_eq!(m.mae, c.abs());
        prop_assert_eq!(m.mean_error, c);
        Ok(())
    });
    let ok = ordering.is_ok() && constant.is_ok();
    report(
        10,
        "metrics algebra",
        ok,
        &format!(
            "rmse >= mae >= |mean| on 2000 random series: {}; constant offsets exact on 2000 series: {}",
            ordering.is_ok(),
            constant.is_ok()
        ),
    );
    assert!(ok, "{ordering:?} {constant:?}");
}
