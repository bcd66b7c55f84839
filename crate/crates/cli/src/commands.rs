use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use ndarray::Array2;
use rayon::prelude::*;

use raceline_core::dataset::{
    augment_track, parse_manifest, split_dataset, write_manifest, FamilySplit, ManifestEntry, Split, Transform,
};
use raceline_core::evaluation::{evaluate as score, measure_latency, median, pooled_report, ErrorReport};
use raceline_core::geometry::{build_normals, resample_centerline, resolve_intersections, NormalSet};
use raceline_core::geometry::{DEFAULT_MAX_TILT, DEFAULT_TILT_STEP};
use raceline_core::network::{load_model, load_model_for, save_model, train_with, windows_to_arrays};
use raceline_core::oracle::{generate_targets, mcp_solve};
use raceline_core::predictor::{predict_line_with, predict_on_normals, Execution};
use raceline_core::synth::oval_track;
use raceline_core::trackio::{parse_raceline_csv, parse_track_csv, write_raceline_csv, write_track_csv};
use raceline_core::windows::{encode_features, make_windows, write_windows};
use raceline_core::{Error, LineSource, MlpModel, ModelMeta, RacingLine, Track, Window};

use crate::config::RunConfig;
use crate::svg::{overlay, Series};
use crate::{CliError, Common};

pub const MANIFEST: &str = "manifest.csv";

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn in_context<T>(path: &Path, r: raceline_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_track(path: &Path) -> Result<Track, CliError> {
    in_context(path, parse_track_csv(&read(path)?))
}

fn read_line(path: &Path) -> Result<RacingLine, CliError> {
    in_context(path, parse_raceline_csv(&read(path)?))
}

fn resolve(dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Resampled, repaired normals: the same pipeline the oracle and predictor use.
fn normals_at(track: &Track, spacing: f64) -> raceline_core::Result<NormalSet> {
    let ns = build_normals(&resample_centerline(track, spacing)?)?;
    resolve_intersections(&ns, DEFAULT_MAX_TILT, DEFAULT_TILT_STEP)
}

fn family_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "track".into())
}

// ---------------------------------------------------------------- gen-data

#[derive(Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    /// Track CSV files; each file stem names an augmentation family.
    #[arg(required = true)]
    tracks: Vec<PathBuf>,
    /// Output directory for the manifest and per-circuit files.
    #[arg(long)]
    out: PathBuf,
    /// Use only the untransformed tracks.
    #[arg(long)]
    no_augment: bool,
}

struct Circuit {
    family: String,
    transform: Transform,
    track: Track,
}

pub fn gen_data(a: GenDataArgs) -> Result<(), CliError> {
    let mut cfg = a.common.run_config()?;
    if a.no_augment {
        cfg.augment.scales = vec![1.0];
        cfg.augment.flip = false;
        cfg.augment.reverse = false;
    }
    let spec = cfg.augment();
    fs::create_dir_all(&a.out).map_err(|e| CliError::input(format!("{}: {e}", a.out.display())))?;

    let mut failed = 0usize;
    let mut seen = HashSet::new();
    let mut circuits = Vec::new();
    for path in &a.tracks {
        let family = family_of(path);
        if family.contains(',') || !seen.insert(family.clone()) {
            eprintln!(
                "skipping {}: duplicate or unusable family name {family:?}",
                path.display()
            );
            failed += 1;
            continue;
        }
        let track = read_track(path).and_then(|mut t| {
            t.name = family.clone();
            in_context(path, augment_track(&t, &spec))
        });
        match track {
            Ok(aug) => circuits.extend(aug.into_iter().map(|c| Circuit {
                family: c.family,
                transform: c.transform,
                track: c.track,
            })),
            Err(CliError::Input(e) | CliError::Internal(e)) => {
                eprintln!("skipping {e}");
                failed += 1;
            }
        }
    }

    let out = &a.out;
    let results: Vec<Result<usize, String>> = pool(a.common.jobs)?.install(|| {
        circuits
            .par_iter()
            .map(|c| write_circuit(c, &cfg, out).map_err(|e| format!("{} {}: {e}", c.family, c.transform)))
            .collect()
    });

    let mut families: Vec<String> = Vec::new();
    let mut kept = Vec::new();
    let mut windows = 0;
    for (c, r) in circuits.iter().zip(results) {
        match r {
            Ok(n) => {
                windows += n;
                if families.last() != Some(&c.family) {
                    families.push(c.family.clone());
                }
                kept.push(c);
            }
            Err(e) => {
                eprintln!("failed {e}");
                failed += 1;
            }
        }
    }

    let split = if families.len() >= 3 {
        split_dataset(&families, &cfg.split())?
    } else {
        if !families.is_empty() {
            eprintln!("note: {} families is too few to split, all go to train", families.len());
        }
        FamilySplit {
            train: families.clone(),
            val: Vec::new(),
            test: Vec::new(),
        }
    };
    let entries: Vec<ManifestEntry> = kept
        .iter()
        .map(|c| {
            let stem = circuit_stem(c);
            ManifestEntry {
                family: c.family.clone(),
                transform: c.transform,
                split: split.split_of(&c.family).unwrap_or(Split::Train),
                track_path: format!("{stem}.track.csv"),
                targets_path: format!("{stem}.targets.csv"),
            }
        })
        .collect();
    write(&out.join(MANIFEST), &write_manifest(&entries)?)?;
    println!(
        "wrote {}: {} circuits from {} families (train {} / val {} / test {}), {} windows",
        out.join(MANIFEST).display(),
        entries.len(),
        families.len(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        windows
    );
    if failed > 0 {
        return Err(CliError::input(format!("{failed} input(s) failed")));
    }
    Ok(())
}

fn circuit_stem(c: &Circuit) -> String {
    format!("{}__{}", c.family, c.transform)
}

/// Solves and writes one circuit; returns its window count.
fn write_circuit(c: &Circuit, cfg: &RunConfig, out: &Path) -> Result<usize, CliError> {
    let (ns, w) = generate_targets(&c.track, &cfg.oracle(), cfg.spacing)?;
    let line = RacingLine::from_waypoints(&ns, w.clone(), LineSource::Oracle)?;
    let feats = encode_features(&ns, cfg.l_ref)?;
    let windows = make_windows(&feats, &w, cfg.foresight, cfg.sampling, ns.cyclic)?;
    let stem = circuit_stem(c);
    write(&out.join(format!("{stem}.track.csv")), &write_track_csv(&c.track))?;
    write(&out.join(format!("{stem}.targets.csv")), &write_raceline_csv(&line)?)?;
    write(
        &out.join(format!("{stem}.windows.csv")),
        &write_windows(&windows, cfg.foresight, cfg.sampling, cfg.l_ref),
    )?;
    Ok(windows.len())
}

// ---------------------------------------------------------------- train

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// Model file to write; the loss history goes next to it.
    #[arg(long)]
    out: PathBuf,
    /// Hidden layer sizes, e.g. 64,32,32.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
}

struct Loaded {
    entry: ManifestEntry,
    track: Track,
    ns: NormalSet,
    targets: Vec<f64>,
}

fn load_entry(dir: &Path, entry: &ManifestEntry, spacing: f64) -> Result<Loaded, CliError> {
    let track_path = resolve(dir, &entry.track_path);
    let targets_path = resolve(dir, &entry.targets_path);
    let track = read_track(&track_path)?;
    if !targets_path.exists() {
        return Err(Error::MissingTargets(targets_path.display().to_string()).into());
    }
    let reference = read_line(&targets_path)?;
    let ns = in_context(&track_path, normals_at(&track, spacing))?;
    if reference.w.len() != ns.len() {
        let e = Error::LengthMismatch {
            expected: ns.len(),
            actual: reference.w.len(),
        };
        return Err(CliError::input(format!("{}: {e}", targets_path.display())));
    }
    Ok(Loaded {
        entry: entry.clone(),
        track,
        ns,
        targets: reference.w,
    })
}

fn load_split(manifest: &Path, split: Split, spacing: f64) -> Result<Vec<Loaded>, CliError> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let entries = in_context(manifest, parse_manifest(&read(manifest)?))?;
    entries
        .par_iter()
        .filter(|e| e.split == split)
        .map(|e| load_entry(dir, e, spacing))
        .collect()
}

fn windows_of(loaded: &[Loaded], meta: &ModelMeta) -> Result<Vec<Window>, CliError> {
    let mut out = Vec::new();
    for l in loaded {
        let feats = encode_features(&l.ns, meta.l_ref)?;
        out.extend(make_windows(&feats, &l.targets, meta.f, meta.s, l.ns.cyclic)?);
    }
    Ok(out)
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = a.common.run_config()?;
    if let Some(h) = a.hidden {
        cfg.train.hidden = h;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let meta = ModelMeta {
        f: cfg.foresight,
        s: cfg.sampling,
        l_ref: cfg.l_ref,
        spacing: cfg.spacing,
        ..ModelMeta::new(cfg.foresight, cfg.sampling)
    };
    let tc = cfg.train_config();
    pool(a.common.jobs)?.install(|| {
        let train_set = windows_of(&load_split(&a.manifest, Split::Train, cfg.spacing)?, &meta)?;
        let val_set = windows_of(&load_split(&a.manifest, Split::Val, cfg.spacing)?, &meta)?;
        if train_set.is_empty() {
            return Err(Error::EmptyDataset.into());
        }
        let mut model = MlpModel::new(meta.clone(), &cfg.train.hidden, cfg.seed)?;
        let val = if val_set.is_empty() {
            None
        } else {
            Some(windows_to_arrays(&val_set, model.input_len(), model.output_len())?)
        };
        println!(
            "training {} on {} windows ({} validation)",
            model.summary(),
            train_set.len(),
            val_set.len()
        );
        let mut history = String::from("epoch,train_loss,val_loss,val_mae\n");
        let mut failure = None;
        train_with(&mut model, &train_set, &tc, |rep, m| {
            let (vl, vm) = match &val {
                Some((x, y)) => match validation(m, x, y, tc.huber_delta) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        (f64::NAN, f64::NAN)
                    }
                },
                None => (f64::NAN, f64::NAN),
            };
            println!(
                "epoch {}/{} train_loss={:.6e} val_loss={vl:.6e} val_mae={vm:.6}",
                rep.epoch + 1,
                tc.epochs,
                rep.train_loss
            );
            writeln!(history, "{},{},{vl},{vm}", rep.epoch + 1, rep.train_loss).unwrap();
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        model.train_config = tc;
        write(&a.out, &save_model(&model))?;
        write(&a.out.with_extension("history.csv"), &history)?;
        println!("wrote {}", a.out.display());
        Ok(())
    })
}

/// Validation loss and mean absolute error in waypoint fractions.
fn validation(m: &MlpModel, x: &Array2<f64>, y: &Array2<f64>, delta: f64) -> raceline_core::Result<(f64, f64)> {
    let loss = m.loss_batch(x.view(), y.view(), delta)?;
    let pred = m.forward_batch(x.view())?;
    let mae = (&pred - y).mapv(f64::abs).mean().unwrap_or(f64::NAN);
    Ok((loss, mae))
}

// ---------------------------------------------------------------- predict

#[derive(Args)]
pub struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    track: PathBuf,
    /// Racing-line CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Vehicle width in metres; the line keeps half of it to either edge.
    #[arg(long, default_value_t = 0.0)]
    width: f64,
    /// Also write an SVG overlay here.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Reference racing line to overlay and score against.
    #[arg(long)]
    reference: Option<PathBuf>,
}

fn read_model(path: &Path, common: &Common) -> Result<MlpModel, CliError> {
    let text = read(path)?;
    let model = match (common.foresight, common.sampling) {
        (Some(f), Some(s)) => load_model_for(&text, f, s),
        (Some(f), None) => load_model(&text).and_then(|m| m.check_compatible(f, m.meta.s).map(|_| m)),
        (None, Some(s)) => load_model(&text).and_then(|m| m.check_compatible(m.meta.f, s).map(|_| m)),
        (None, None) => load_model(&text),
    };
    let model = in_context(path, model)?;
    if let Some(sp) = common.spacing {
        if sp != model.meta.spacing {
            let e = Error::IncompatibleModel(format!("model expects spacing {}, got {sp}", model.meta.spacing));
            return Err(CliError::input(format!("{}: {e}", path.display())));
        }
    }
    Ok(model)
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    let model = read_model(&a.model, &a.common)?;
    let track = read_track(&a.track)?;
    let exec = if a.common.jobs == 1 {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let (ns, line) = pool(a.common.jobs)?.install(|| predict_line_with(&model, &track, a.width, exec))?;
    write(&a.out, &write_raceline_csv(&line)?)?;
    println!("wrote {}: {} waypoints", a.out.display(), line.w.len());

    let reference = a.reference.as_deref().map(read_line).transpose()?;
    if let Some(r) = &reference {
        if r.w.len() == ns.len() {
            let rep = score(&line, r, &ns, &RunConfig::default().apex())?;
            println!("{}", kv_line("reference", &rep));
        } else {
            eprintln!(
                "note: reference has {} waypoints, prediction {}; not scored",
                r.w.len(),
                ns.len()
            );
        }
    }
    if let Some(svg_path) = &a.svg {
        let centre = ns.centers();
        let mut series = vec![Series {
            label: "centreline",
            colour: "grey",
            points: &centre,
            dashed: true,
        }];
        if let Some(r) = &reference {
            series.push(Series {
                label: "reference",
                colour: "blue",
                points: &r.points,
                dashed: false,
            });
        }
        series.push(Series {
            label: "prediction",
            colour: "red",
            points: &line.points,
            dashed: false,
        });
        write(svg_path, &overlay(&ns, &series))?;
        println!("wrote {}", svg_path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// Model to evaluate.
    #[arg(long, required_unless_present = "lines", conflicts_with = "lines")]
    model: Option<PathBuf>,
    /// Score precomputed racing lines instead: for every circuit, the file
    /// in this directory named like its targets file.
    #[arg(long)]
    lines: Option<PathBuf>,
    /// Manifest split to score: train, val or test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Timed repetitions per circuit for the latency column.
    #[arg(long)]
    reps: Option<usize>,
}

struct Row {
    name: String,
    report: ErrorReport,
    oracle_seconds: f64,
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let cfg = a.common.run_config()?;
    let split = Split::parse(&a.split).ok_or_else(|| CliError::input(format!("unknown split {:?}", a.split)))?;
    let model = a.model.as_deref().map(|p| read_model(p, &a.common)).transpose()?;
    let spacing = model.as_ref().map_or(cfg.spacing, |m| m.meta.spacing);
    let reps = a.reps.unwrap_or(cfg.evaluate.latency_reps).max(1);
    let apex = cfg.apex();
    let oracle = cfg.oracle();

    let mut rows: Vec<Row> = pool(a.common.jobs)?
        .install(|| {
            let loaded = load_split(&a.manifest, split, spacing)?;
            if loaded.is_empty() {
                return Err(CliError::input(format!(
                    "{} split of {} is empty",
                    split.as_str(),
                    a.manifest.display()
                )));
            }
            loaded
                .par_iter()
                .map(|l| {
                    let reference = RacingLine::from_waypoints(&l.ns, l.targets.clone(), LineSource::Oracle)?;
                    let pred = match (&model, &a.lines) {
                        (Some(m), _) => predict_on_normals(m, &l.ns, 0.0, Execution::Serial)?,
                        (None, Some(dir)) => {
                            let file = Path::new(&l.entry.targets_path).file_name().unwrap_or_default();
                            let path = dir.join(file);
                            let p = read_line(&path)?;
                            if p.w.len() != l.ns.len() {
                                let e = Error::LengthMismatch {
                                    expected: l.ns.len(),
                                    actual: p.w.len(),
                                };
                                return Err(CliError::input(format!("{}: {e}", path.display())));
                            }
                            p
                        }
                        (None, None) => unreachable!("clap requires --model or --lines"),
                    };
                    let report = score(&pred, &reference, &l.ns, &apex)?;
                    let start = Instant::now();
                    mcp_solve(&l.ns, &oracle)?;
                    Ok(Row {
                        name: format!("{}__{}", l.entry.family, l.entry.transform),
                        report,
                        oracle_seconds: start.elapsed().as_secs_f64(),
                    })
                })
                .collect::<Result<Vec<Row>, CliError>>()
                .map(|rows| (rows, loaded))
        })
        .and_then(|(mut rows, loaded)| {
            // timed one circuit at a time so runs do not compete for cores
            if let Some(m) = &model {
                for (row, l) in rows.iter_mut().zip(&loaded) {
                    row.report.latency = Some(measure_latency(m, &l.track, reps)?.median_seconds);
                }
            }
            Ok(rows)
        })?;

    for row in &rows {
        check_report(&row.name, &row.report)?;
    }
    let pooled = pooled_report(&rows.iter().map(|r| r.report.clone()).collect::<Vec<_>>())?;
    check_report("aggregate", &pooled)?;
    let oracle_mean = rows.iter().map(|r| r.oracle_seconds).sum::<f64>() / rows.len() as f64;
    rows.push(Row {
        name: "Aggregate".into(),
        report: pooled,
        oracle_seconds: oracle_mean,
    });
    print!("{}", table(&rows));
    println!();
    for row in &rows {
        println!("{} oracle_s={:.6}", kv_line(&row.name, &row.report), row.oracle_seconds);
    }
    Ok(())
}

fn check_report(name: &str, r: &ErrorReport) -> Result<(), CliError> {
    let ok = r.rmse >= r.mae && r.mae >= 0.0 && r.mean_error.abs() <= r.mae && r.ci50 <= r.ci95;
    if ok {
        Ok(())
    } else {
        Err(CliError::internal(format!(
            "metric ordering violated for {name}: {r:?}"
        )))
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.prec$}"))
}

fn table(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>7}  {:>8}  {:>8}  {:>14}  {:>12}  {:>15}",
        "Circuit", "Normals", "RMSE (m)", "MAE (m)", "Apex Error (m)", "ANN time (s)", "Oracle time (s)"
    )
    .unwrap();
    for (k, r) in rows.iter().enumerate() {
        if k + 1 == rows.len() {
            writeln!(out, "{}", "-".repeat(width + 78)).unwrap();
        }
        let rep = &r.report;
        writeln!(
            out,
            "{:<width$}  {:>7}  {:>8.3}  {:>8.3}  {:>14}  {:>12}  {:>15.4}",
            r.name,
            rep.per_normal_error.len(),
            rep.rmse,
            rep.mae,
            opt(rep.apex_error_mae, 3),
            opt(rep.latency, 4),
            r.oracle_seconds
        )
        .unwrap();
    }
    out
}

fn kv_line(name: &str, r: &ErrorReport) -> String {
    format!(
        "circuit={name} normals={} rmse={:.6} mae={:.6} mean_error={:.6} ci50={:.6} ci95={:.6} apex_error={} apex_count={} latency_s={}",
        r.per_normal_error.len(),
        r.rmse,
        r.mae,
        r.mean_error,
        r.ci50,
        r.ci95,
        opt(r.apex_error_mae, 6),
        r.apex_count,
        opt(r.latency, 6)
    )
}

// ---------------------------------------------------------------- plot

#[derive(Args)]
pub struct PlotArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    track: PathBuf,
    /// Racing-line CSV to draw; repeat for several.
    #[arg(long)]
    line: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

const COLOURS: [&str; 6] = ["red", "blue", "green", "orange", "purple", "teal"];

pub fn plot(a: PlotArgs) -> Result<(), CliError> {
    let cfg = a.common.run_config()?;
    let track = read_track(&a.track)?;
    let ns = in_context(&a.track, normals_at(&track, cfg.spacing))?;
    let lines = a.line.iter().map(|p| read_line(p)).collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = a
        .line
        .iter()
        .zip(&lines)
        .map(|(p, l)| format!("{} ({})", family_of(p), l.source.as_str()))
        .collect();
    let series: Vec<Series> = lines
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(k, (l, label))| Series {
            label,
            colour: COLOURS[k % COLOURS.len()],
            points: &l.points,
            dashed: false,
        })
        .collect();
    write(&a.out, &overlay(&ns, &series))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- bench

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    /// Tracks to time; synthetic ovals are used when none are given.
    #[arg(long)]
    track: Vec<PathBuf>,
    /// Normal counts of the synthetic ovals.
    #[arg(long, value_delimiter = ',', default_value = "300,600")]
    normals: Vec<usize>,
    #[arg(long, default_value_t = 21)]
    reps: usize,
}

/// Stadium whose centreline holds about `normals` stations at `spacing`.
fn bench_oval(normals: usize, spacing: f64) -> raceline_core::Result<Track> {
    let lap = normals as f64 * spacing;
    let straight = 0.3 * lap;
    let radius = (lap - 2.0 * straight) / std::f64::consts::TAU;
    oval_track(&format!("oval{normals}"), straight, radius, 6.0, spacing / 2.0)
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let model = read_model(&a.model, &a.common)?;
    let tracks: Vec<Track> = if a.track.is_empty() {
        a.normals
            .iter()
            .map(|&n| bench_oval(n, model.meta.spacing))
            .collect::<raceline_core::Result<_>>()?
    } else {
        a.track.iter().map(|p| read_track(p)).collect::<Result<_, _>>()?
    };
    let reps = a.reps.max(1);
    let pool = pool(a.common.jobs)?;
    for t in &tracks {
        let serial = measure_latency(&model, t, reps)?;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            pool.install(|| predict_line_with(&model, t, 0.0, Execution::Parallel))?;
            times.push(start.elapsed().as_secs_f64());
        }
        println!(
            "track={} normals={} reps={reps} serial_median_s={:.6} parallel_median_s={:.6} threads={}",
            t.name,
            serial.normals,
            serial.median_seconds,
            median(&mut times),
            pool.current_num_threads()
        );
    }
    Ok(())
}
