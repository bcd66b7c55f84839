//! Racing-line prediction: track geometry, windowed features, a
//! feed-forward waypoint regressor, a minimum-curvature oracle for
//! training targets, and accuracy metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod network;
pub mod oracle;
pub mod point;
pub mod predictor;
pub mod synth;
pub mod trackio;
pub mod windows;

pub use error::{Error, Result};
pub use geometry::{Normal, NormalSet};
pub use network::{MlpModel, ModelMeta, TrainConfig};
pub use point::Point;
pub use predictor::{LineSource, RacingLine};
pub use trackio::Track;
pub use windows::Window;
