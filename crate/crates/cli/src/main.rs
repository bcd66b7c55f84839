//! `raceline`: dataset generation, training, prediction, evaluation,
//! plotting and benchmarking from the command line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid input files.
    Input(String),
    /// A result that breaks an invariant the toolkit guarantees.
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<raceline_core::Error> for CliError {
    fn from(e: raceline_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "raceline", version, about = "Racing-line prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand; flags override the config file.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resampling interval in metres.
    #[arg(long)]
    spacing: Option<f64>,
    /// Normals either side of the window centre (f).
    #[arg(long)]
    foresight: Option<usize>,
    /// Predicted normals either side of the window centre (s).
    #[arg(long)]
    sampling: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl Common {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(v) = self.spacing {
            cfg.spacing = v;
        }
        if let Some(v) = self.foresight {
            cfg.foresight = v;
        }
        if let Some(v) = self.sampling {
            cfg.sampling = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Augment tracks, solve oracle targets and write windows plus a manifest.
    GenData(commands::GenDataArgs),
    /// Train a model on the train split of a manifest.
    Train(commands::TrainArgs),
    /// Predict the racing line of one track.
    Predict(commands::PredictArgs),
    /// Score predictions on a manifest split against the oracle targets.
    Evaluate(commands::EvaluateArgs),
    /// Draw a track and any number of racing lines as SVG.
    Plot(commands::PlotArgs),
    /// Time prediction on given or synthetic tracks.
    Bench(commands::BenchArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Plot(a) => commands::plot(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; --help and --version are not errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CliError::Input(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(CliError::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        // the panic message has already been printed by the hook
        Err(_) => ExitCode::from(2),
    }
}
