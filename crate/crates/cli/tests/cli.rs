use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::{Array1, Array2};
use raceline_core::dataset::parse_manifest;
use raceline_core::network::{save_model, Layer};
use raceline_core::synth::{circle_track, random_track, RandomTrackConfig};
use raceline_core::trackio::{parse_raceline_csv, write_track_csv};
use raceline_core::windows::parse_windows;
use raceline_core::{MlpModel, ModelMeta, Track};
use tempfile::TempDir;

fn raceline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raceline"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_track(dir: &Path, name: &str, t: &Track) -> PathBuf {
    let p = dir.join(format!("{name}.csv"));
    fs::write(&p, write_track_csv(t)).unwrap();
    p
}

fn compact_tracks(dir: &Path, count: usize) -> Vec<PathBuf> {
    (0..count)
        .map(|i| {
            let t = random_track("t", 500 + i as u64, &RandomTrackConfig::compact()).unwrap();
            write_track(dir, &format!("circuit{i}"), &t)
        })
        .collect()
}

/// Network whose every output is `value`, whatever the input.
fn constant_model(f: usize, s: usize, value: f64) -> String {
    let meta = ModelMeta::new(f, s);
    let (i, o) = (meta.input_len(), meta.output_len());
    let model = MlpModel::from_layers(
        vec![
            Layer {
                weights: Array2::zeros((i, 4)),
                bias: Array1::zeros(4),
            },
            Layer {
                weights: Array2::zeros((4, o)),
                bias: Array1::from_elem(o, (value - 0.5) / 0.2),
            },
        ],
        meta,
    )
    .unwrap();
    save_model(&model)
}

fn desk_config(dir: &Path) -> PathBuf {
    let p = dir.join("desk.toml");
    fs::write(
        &p,
        "foresight = 10\nsampling = 2\nseed = 3\n\
         [split]\ntrain = 0.6\nval = 0.2\ntest = 0.2\n\
         [augment]\nscales = [1.0]\nflip = true\nreverse = false\n\
         [train]\nhidden = [16, 8]\nepochs = 2\nbatch_size = 32\nlearning_rate = 0.003\n\
         [evaluate]\nlatency_reps = 1\n",
    )
    .unwrap();
    p
}

fn kv(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|f| f.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn one_identity_track_gives_one_window_per_normal() {
    let tmp = TempDir::new().unwrap();
    let track = write_track(tmp.path(), "ring", &circle_track("ring", 60.0, 5.0, 400).unwrap());
    let out = tmp.path().join("data");
    ok(&raceline(&[
        "gen-data",
        "--no-augment",
        "--foresight",
        "10",
        "--sampling",
        "2",
        "--out",
        s(&out),
        s(&track),
    ]));

    let entries = parse_manifest(&fs::read_to_string(out.join("manifest.csv")).unwrap()).unwrap();
    assert_eq!(entries.len(), 1);
    assert!(entries[0].transform.is_identity());
    let targets = parse_raceline_csv(&fs::read_to_string(out.join(&entries[0].targets_path)).unwrap()).unwrap();
    let windows = parse_windows(&fs::read_to_string(out.join("ring__s1.windows.csv")).unwrap()).unwrap();
    assert_eq!(windows.len(), targets.w.len());
    // 2 pi 60 m at 5 m spacing
    assert_eq!(targets.w.len(), 75);
}

#[test]
fn augmentation_expands_each_family_and_never_straddles_splits() {
    let tmp = TempDir::new().unwrap();
    let tracks = compact_tracks(tmp.path(), 5);
    let cfg = tmp.path().join("aug.toml");
    fs::write(
        &cfg,
        "[augment]\nscales = [0.9, 1.0]\n[split]\ntrain = 0.6\nval = 0.2\ntest = 0.2\n",
    )
    .unwrap();
    let out = tmp.path().join("data");
    let mut args = vec![
        "gen-data",
        "--config",
        s(&cfg),
        "--foresight",
        "8",
        "--sampling",
        "2",
        "--out",
        s(&out),
    ];
    args.extend(tracks.iter().map(|p| s(p)));
    ok(&raceline(&args));

    let entries = parse_manifest(&fs::read_to_string(out.join("manifest.csv")).unwrap()).unwrap();
    assert_eq!(entries.len(), 5 * 2 * 2 * 2);
    for e in &entries {
        let same_family: Vec<_> = entries.iter().filter(|o| o.family == e.family).collect();
        assert_eq!(same_family.len(), 8);
        assert!(
            same_family.iter().all(|o| o.split == e.split),
            "{} straddles splits",
            e.family
        );
        assert!(out.join(&e.track_path).exists() && out.join(&e.targets_path).exists());
    }
}

#[test]
fn corrupt_track_is_reported_and_the_rest_processed() {
    let tmp = TempDir::new().unwrap();
    let good = compact_tracks(tmp.path(), 2);
    let bad = tmp.path().join("broken.csv");
    fs::write(&bad, "0,0,5,5\n1,zero,5,5\n").unwrap();
    let out = tmp.path().join("data");
    let o = raceline(&[
        "gen-data",
        "--no-augment",
        "--foresight",
        "10",
        "--sampling",
        "2",
        "--out",
        s(&out),
        s(&good[0]),
        s(&bad),
        s(&good[1]),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken.csv"), "{err}");
    let entries = parse_manifest(&fs::read_to_string(out.join("manifest.csv")).unwrap()).unwrap();
    let families: Vec<_> = entries.iter().map(|e| e.family.as_str()).collect();
    assert_eq!(families, ["circuit0", "circuit1"]);
}

#[test]
fn gen_data_is_reproducible_across_runs_and_job_counts() {
    let tmp = TempDir::new().unwrap();
    let tracks = compact_tracks(tmp.path(), 3);
    let cfg = tmp.path().join("c.toml");
    fs::write(
        &cfg,
        "seed = 7\nforesight = 10\nsampling = 2\n[augment]\nscales = [1.0, 1.1]\n",
    )
    .unwrap();
    let run = |dir: &str, jobs: &str| {
        let out = tmp.path().join(dir);
        let mut args = vec!["gen-data", "--config", s(&cfg), "--jobs", jobs, "--out", s(&out)];
        args.extend(tracks.iter().map(|p| s(p)));
        ok(&raceline(&args));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a.len(), 1 + 3 * 8 * 3);
    assert!(a == b && a == c);
}

#[test]
fn train_predict_evaluate_round_trip() {
    let tmp = TempDir::new().unwrap();
    let tracks = compact_tracks(tmp.path(), 5);
    let cfg = desk_config(tmp.path());
    let data = tmp.path().join("data");
    let mut args = vec!["gen-data", "--config", s(&cfg), "--out", s(&data)];
    args.extend(tracks.iter().map(|p| s(p)));
    ok(&raceline(&args));
    let manifest = data.join("manifest.csv");

    let m1 = tmp.path().join("m1.txt");
    let m2 = tmp.path().join("m2.txt");
    let log = ok(&raceline(&[
        "train",
        "--config",
        s(&cfg),
        "--manifest",
        s(&manifest),
        "--out",
        s(&m1),
    ]));
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch ")).count(), 2, "{log}");
    assert!(log.contains("val_loss="));
    ok(&raceline(&[
        "train",
        "--config",
        s(&cfg),
        "--manifest",
        s(&manifest),
        "--out",
        s(&m2),
    ]));
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    let history = fs::read_to_string(tmp.path().join("m1.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    let line = tmp.path().join("line.csv");
    ok(&raceline(&[
        "predict",
        "--model",
        s(&m1),
        "--track",
        s(&tracks[0]),
        "--out",
        s(&line),
    ]));
    let predicted = parse_raceline_csv(&fs::read_to_string(&line).unwrap()).unwrap();
    assert!(predicted.w.iter().all(|w| (0.0..=1.0).contains(w)));

    let report = ok(&raceline(&[
        "evaluate",
        "--config",
        s(&cfg),
        "--manifest",
        s(&manifest),
        "--model",
        s(&m1),
    ]));
    for header in [
        "RMSE (m)",
        "MAE (m)",
        "Apex Error (m)",
        "ANN time (s)",
        "Oracle time (s)",
    ] {
        assert!(report.contains(header), "{report}");
    }
    let kv_lines: Vec<&str> = report.lines().filter(|l| l.starts_with("circuit=")).collect();
    let (rows, agg) = kv_lines.split_at(kv_lines.len() - 1);
    assert_eq!(rows.len(), 2, "{report}");
    // aggregate mae is the normal-weighted mean of the per-circuit maes
    let normals: f64 = rows.iter().map(|l| kv(l, "normals")).sum();
    let weighted: f64 = rows.iter().map(|l| kv(l, "mae") * kv(l, "normals")).sum::<f64>() / normals;
    assert_eq!(kv(agg[0], "normals"), normals);
    assert!((kv(agg[0], "mae") - weighted).abs() < 1e-5, "{report}");
    assert!(rows.iter().all(|l| kv(l, "latency_s") > 0.0));
}

#[test]
fn perfect_lines_evaluate_to_zero_error() {
    let tmp = TempDir::new().unwrap();
    let tracks = compact_tracks(tmp.path(), 3);
    let data = tmp.path().join("data");
    let mut args = vec![
        "gen-data",
        "--no-augment",
        "--foresight",
        "10",
        "--sampling",
        "2",
        "--out",
        s(&data),
    ];
    args.extend(tracks.iter().map(|p| s(p)));
    ok(&raceline(&args));
    let report = ok(&raceline(&[
        "evaluate",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--lines",
        s(&data),
        "--split",
        "train",
    ]));
    let kv_lines: Vec<&str> = report.lines().filter(|l| l.starts_with("circuit=")).collect();
    assert!(!kv_lines.is_empty());
    for l in kv_lines {
        for key in ["rmse", "mae", "mean_error", "ci50", "ci95"] {
            assert_eq!(kv(l, key), 0.0, "{l}");
        }
    }
}

#[test]
fn evaluate_without_targets_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let tracks = compact_tracks(tmp.path(), 1);
    let data = tmp.path().join("data");
    ok(&raceline(&[
        "gen-data",
        "--no-augment",
        "--foresight",
        "10",
        "--sampling",
        "2",
        "--out",
        s(&data),
        s(&tracks[0]),
    ]));
    fs::remove_file(data.join("circuit0__s1.targets.csv")).unwrap();
    let o = raceline(&[
        "evaluate",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--lines",
        s(&data),
        "--split",
        "train",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reference targets missing"));
}

#[test]
fn train_on_an_empty_split_fails() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    fs::write(
        data.join("manifest.csv"),
        "# family_id,transform_tag,split,track_path,targets_path\n",
    )
    .unwrap();
    let o = raceline(&[
        "train",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset is empty"));
}

#[test]
fn constant_stub_predicts_the_centreline() {
    let tmp = TempDir::new().unwrap();
    let track = write_track(tmp.path(), "ring", &circle_track("ring", 60.0, 5.0, 400).unwrap());
    let model = tmp.path().join("stub.txt");
    fs::write(&model, constant_model(4, 1, 0.5)).unwrap();
    let line = tmp.path().join("line.csv");
    ok(&raceline(&[
        "predict",
        "--model",
        s(&model),
        "--track",
        s(&track),
        "--out",
        s(&line),
    ]));
    let l = parse_raceline_csv(&fs::read_to_string(&line).unwrap()).unwrap();
    assert!(l.w.iter().all(|&w| w == 0.5));
    for p in &l.points {
        assert!((p.norm() - 60.0).abs() < 0.05, "{p:?}");
    }
}

#[test]
fn vehicle_width_keeps_the_line_off_the_edges() {
    let tmp = TempDir::new().unwrap();
    let track = write_track(tmp.path(), "ring", &circle_track("ring", 60.0, 5.0, 400).unwrap());
    let line = tmp.path().join("line.csv");
    for value in [0.0, 1.0] {
        let model = tmp.path().join("stub.txt");
        fs::write(&model, constant_model(4, 1, value)).unwrap();
        ok(&raceline(&[
            "predict",
            "--model",
            s(&model),
            "--track",
            s(&track),
            "--width",
            "2",
            "--out",
            s(&line),
        ]));
        let l = parse_raceline_csv(&fs::read_to_string(&line).unwrap()).unwrap();
        assert!(l.w.iter().all(|&w| (0.1 - 1e-12..=0.9 + 1e-12).contains(&w)));
        let edge = if value == 0.0 { 0.1 } else { 0.9 };
        assert!(l.w.iter().all(|&w| (w - edge).abs() < 1e-12));
    }
    let o = raceline(&[
        "predict",
        "--model",
        s(&tmp.path().join("stub.txt")),
        "--track",
        s(&track),
        "--width",
        "12",
        "--out",
        s(&line),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

/// Every opened element is closed in order; self-closing tags are fine.
fn balanced(xml: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = xml;
    while let Some(start) = rest.find('<') {
        let Some(end) = rest[start..].find('>') else {
            return false;
        };
        let tag = &rest[start + 1..start + end];
        rest = &rest[start + end + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            if stack.pop().as_deref() != Some(name.trim()) {
                return false;
            }
        } else if !tag.ends_with('/') {
            stack.push(tag.split_whitespace().next().unwrap_or("").to_string());
        }
    }
    stack.is_empty()
}

#[test]
fn svg_overlay_is_well_formed_with_three_polylines_and_a_legend() {
    let tmp = TempDir::new().unwrap();
    let tracks = compact_tracks(tmp.path(), 1);
    let data = tmp.path().join("data");
    ok(&raceline(&[
        "gen-data",
        "--no-augment",
        "--foresight",
        "10",
        "--sampling",
        "2",
        "--out",
        s(&data),
        s(&tracks[0]),
    ]));
    let model = tmp.path().join("stub.txt");
    fs::write(&model, constant_model(4, 1, 0.5)).unwrap();
    let svg = tmp.path().join("plot.svg");
    ok(&raceline(&[
        "predict",
        "--model",
        s(&model),
        "--track",
        s(&tracks[0]),
        "--out",
        s(&tmp.path().join("line.csv")),
        "--reference",
        s(&data.join("circuit0__s1.targets.csv")),
        "--svg",
        s(&svg),
    ]));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(balanced(&text));
    assert_eq!(text.matches("<polyline").count(), 3);
    assert!(text.contains(r#"id="legend""#));
    for label in ["track boundaries", "reference", "prediction"] {
        assert!(text.contains(&format!(">{label}</text>")), "{label}");
    }

    let plot = tmp.path().join("p.svg");
    ok(&raceline(&[
        "plot",
        "--track",
        s(&tracks[0]),
        "--line",
        s(&data.join("circuit0__s1.targets.csv")),
        "--out",
        s(&plot),
    ]));
    let text = fs::read_to_string(&plot).unwrap();
    assert!(balanced(&text));
    assert_eq!(text.matches("<polyline").count(), 1);
}

#[test]
fn usage_and_compatibility_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(raceline(&["predict", "--bogus"]).status.code(), Some(1));
    assert_eq!(raceline(&["--help"]).status.code(), Some(0));
    let track = write_track(tmp.path(), "ring", &circle_track("ring", 60.0, 5.0, 400).unwrap());
    let model = tmp.path().join("stub.txt");
    fs::write(&model, constant_model(4, 1, 0.5)).unwrap();
    let o = raceline(&[
        "predict",
        "--model",
        s(&model),
        "--track",
        s(&track),
        "--foresight",
        "6",
        "--out",
        s(&tmp.path().join("l.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("built for f=4 s=1"));
    fs::write(&model, "not a model").unwrap();
    let o = raceline(&[
        "predict",
        "--model",
        s(&model),
        "--track",
        s(&track),
        "--out",
        s(&tmp.path().join("l.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_times_synthetic_ovals() {
    let tmp = TempDir::new().unwrap();
    let model = tmp.path().join("stub.txt");
    fs::write(&model, constant_model(4, 1, 0.5)).unwrap();
    let out = ok(&raceline(&[
        "bench",
        "--model",
        s(&model),
        "--normals",
        "100,200",
        "--reps",
        "3",
    ]));
    let lines: Vec<&str> = out.lines().filter(|l| l.starts_with("track=")).collect();
    assert_eq!(lines.len(), 2, "{out}");
    let n: Vec<f64> = lines.iter().map(|l| kv(l, "normals")).collect();
    assert!((n[0] - 100.0).abs() <= 2.0 && (n[1] - 200.0).abs() <= 2.0, "{n:?}");
    assert!(lines
        .iter()
        .all(|l| kv(l, "serial_median_s") > 0.0 && kv(l, "parallel_median_s") > 0.0));
}
