//! Run configuration: a TOML file whose every key is optional, with
//! command-line flags applied on top.

use std::path::Path;

use serde::Deserialize;

use raceline_core::dataset::{AugmentSpec, SplitSpec};
use raceline_core::evaluation::ApexConfig;
use raceline_core::network::DEFAULT_HIDDEN;
use raceline_core::oracle::OracleConfig;
use raceline_core::windows::L_REF;
use raceline_core::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spacing: f64,
    pub foresight: usize,
    pub sampling: usize,
    pub l_ref: f64,
    pub seed: u64,
    pub oracle: OracleSection,
    pub augment: AugmentSection,
    pub split: SplitSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spacing: 5.0,
            foresight: 70,
            sampling: 4,
            l_ref: L_REF,
            seed: 0,
            oracle: OracleSection::default(),
            augment: AugmentSection::default(),
            split: SplitSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub max_iters: usize,
    pub tol: f64,
    pub step_size: f64,
    pub margin: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let c = OracleConfig::default();
        Self {
            max_iters: c.max_iters,
            tol: c.tol,
            step_size: c.step_size,
            margin: c.margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub scales: Vec<f64>,
    pub flip: bool,
    pub reverse: bool,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let a = AugmentSpec::default();
        Self {
            scales: a.scales,
            flip: a.flip,
            reverse: a.reverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            train: s.train_frac,
            val: s.val_frac,
            test: s.test_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub huber_delta: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            huber_delta: t.huber_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub kappa_min: f64,
    pub apex_radius: usize,
    pub latency_reps: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        let a = ApexConfig::default();
        Self {
            kappa_min: a.kappa_min,
            apex_radius: a.radius,
            latency_reps: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.spacing > 0.0) {
            return Err(CliError::input(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.sampling > self.foresight {
            return Err(CliError::input(format!(
                "sampling {} exceeds foresight {}",
                self.sampling, self.foresight
            )));
        }
        if !(self.l_ref > 0.0) {
            return Err(CliError::input("l_ref must be positive"));
        }
        self.oracle().validate()?;
        self.augment().validate()?;
        self.split().validate()?;
        self.train_config().validate()?;
        if self.train.hidden.contains(&0) {
            return Err(CliError::input("hidden layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn oracle(&self) -> OracleConfig {
        OracleConfig {
            max_iters: self.oracle.max_iters,
            tol: self.oracle.tol,
            step_size: self.oracle.step_size,
            margin: self.oracle.margin,
        }
    }

    pub fn augment(&self) -> AugmentSpec {
        AugmentSpec {
            scales: self.augment.scales.clone(),
            flip: self.augment.flip,
            reverse: self.augment.reverse,
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_frac: self.split.train,
            val_frac: self.split.val,
            test_frac: self.split.test,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            huber_delta: self.train.huber_delta,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn apex(&self) -> ApexConfig {
        ApexConfig {
            kappa_min: self.evaluate.kappa_min,
            radius: self.evaluate.apex_radius,
        }
    }
}
