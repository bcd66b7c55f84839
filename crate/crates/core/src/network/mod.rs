//! Feed-forward waypoint regressor.
//!
//! Fully connected layers with sigmoid hidden units and a hard-sigmoid
//! output layer, trained on the mean Huber loss over the `2s + 1` outputs
//! with the Nadam optimiser. Inputs are processed as row batches; weights
//! are stored `(fan_in, fan_out)` so a layer is `Z = A W + b`.

mod io;
mod nadam;
mod train;

pub use io::{load_model, load_model_for, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use nadam::{nadam_step, NadamState};
pub use train::{train, train_with, windows_to_arrays, EpochReport};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::windows::{feature_len, FEATURE_ORDER, L_REF};

pub const DEFAULT_HIDDEN: [usize; 3] = [450, 200, 200];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub huber_delta: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            huber_delta: 1.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.huber_delta, self.learning_rate, self.epsilon];
        if positive.iter().any(|v| !(*v > 0.0)) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig("training parameters must be positive".into()));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::InvalidConfig("beta1 and beta2 must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Window geometry the model was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub f: usize,
    pub s: usize,
    pub l_ref: f64,
    pub spacing: f64,
    pub feature_order: String,
}

impl ModelMeta {
    pub fn new(f: usize, s: usize) -> Self {
        Self {
            f,
            s,
            l_ref: L_REF,
            spacing: 5.0,
            feature_order: FEATURE_ORDER.to_string(),
        }
    }

    pub fn input_len(&self) -> usize {
        feature_len(self.f)
    }

    pub fn output_len(&self) -> usize {
        2 * self.s + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub meta: ModelMeta,
    pub train_config: TrainConfig,
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn hard_sigmoid(z: f64) -> f64 {
    (0.2 * z + 0.5).clamp(0.0, 1.0)
}

fn hard_sigmoid_slope(z: f64) -> f64 {
    let y = 0.2 * z + 0.5;
    if y > 0.0 && y < 1.0 {
        0.2
    } else {
        0.0
    }
}

/// Huber loss and its derivative with respect to the residual.
pub fn huber(residual: f64, delta: f64) -> (f64, f64) {
    let a = residual.abs();
    if a <= delta {
        (0.5 * residual * residual, residual)
    } else {
        (delta * (a - 0.5 * delta), delta * residual.signum())
    }
}

/// `[3(2f+1), hidden..., 2s+1]`.
pub fn layer_sizes_for(meta: &ModelMeta, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![meta.input_len()];
    sizes.extend_from_slice(hidden);
    sizes.push(meta.output_len());
    sizes
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, drawn from a seeded ChaCha stream.
    pub fn new(meta: ModelMeta, hidden: &[usize], seed: u64) -> Result<Self> {
        let sizes = layer_sizes_for(&meta, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|p| {
                let limit = (6.0 / (p[0] + p[1]) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((p[0], p[1]), || rng.random_range(-limit..limit)),
                    bias: Array1::zeros(p[1]),
                }
            })
            .collect();
        Self::from_layers(layers, meta)
    }

    /// Full-size network: hidden layers of 450, 200 and 200 units.
    pub fn with_default_architecture(meta: ModelMeta, seed: u64) -> Result<Self> {
        Self::new(meta, &DEFAULT_HIDDEN, seed)
    }

    pub fn from_layers(layers: Vec<Layer>, meta: ModelMeta) -> Result<Self> {
        let model = MlpModel {
            layers,
            meta,
            train_config: TrainConfig::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ShapeMismatch("model has no layers".into()));
        }
        let sizes = self.layer_sizes();
        if sizes[0] != self.meta.input_len() || *sizes.last().unwrap() != self.meta.output_len() {
            return Err(Error::ShapeMismatch(format!(
                "layer sizes {sizes:?} do not fit f={} s={}",
                self.meta.f, self.meta.s
            )));
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].weights.ncols() != pair[1].weights.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} output does not feed layer {}",
                    k + 1
                )));
            }
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::ShapeMismatch(format!("layer {k} bias length")));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.nrows()];
        sizes.extend(self.layers.iter().map(|l| l.weights.ncols()));
        sizes
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        let s = self.layer_sizes();
        s[1..s.len() - 1].to_vec()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    /// Single-window forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass over a batch of windows, one per row.
    ///
    /// Each output row depends only on its own input row, so splitting a
    /// batch into chunks yields bit-identical results.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.input_len()
            )));
        }
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            if k == last {
                z.mapv_inplace(hard_sigmoid);
            } else {
                z.mapv_inplace(sigmoid);
            }
            a = z;
        }
        Ok(a)
    }

    /// Mean Huber loss of one window and its exact parameter gradients.
    pub fn backward(&self, input: &[f64], target: &[f64], delta: f64) -> Result<(f64, Gradients)> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let y = ArrayView2::from_shape((1, target.len()), target).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        self.backward_batch(x, y, delta)
    }

    /// Batch loss (mean over rows of the per-window mean Huber loss) and
    /// its gradients.
    pub fn backward_batch(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, delta: f64) -> Result<(f64, Gradients)> {
        if x.ncols() != self.input_len() || y.ncols() != self.output_len() || x.nrows() != y.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "batch {:?} -> {:?} does not fit model {:?}",
                x.dim(),
                y.dim(),
                self.layer_sizes()
            )));
        }
        let rows = x.nrows();
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let last = self.layers.len() - 1;
        // activations[k] feeds layer k
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        let mut out_pre = Array2::zeros((0, 0));
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = activations[k].dot(&layer.weights);
            z += &layer.bias;
            if k == last {
                out_pre = z.clone();
                z.mapv_inplace(hard_sigmoid);
            } else {
                z.mapv_inplace(sigmoid);
            }
            activations.push(z);
        }

        let scale = 1.0 / (rows * self.output_len()) as f64;
        let pred = &activations[last + 1];
        let mut loss = 0.0;
        let mut dz = Array2::zeros(pred.raw_dim());
        ndarray::Zip::from(&mut dz)
            .and(pred)
            .and(&y)
            .and(&out_pre)
            .for_each(|d, &p, &t, &z| {
                let (l, g) = huber(p - t, delta);
                loss += l;
                *d = g * scale * hard_sigmoid_slope(z);
            });
        loss *= scale;

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let gw = activations[k].t().dot(&dz).as_standard_layout().into_owned();
            let gb = dz.sum_axis(Axis(0));
            if k > 0 {
                let mut prev = dz.dot(&self.layers[k].weights.t());
                ndarray::Zip::from(&mut prev)
                    .and(&activations[k])
                    .for_each(|d, &a| *d *= a * (1.0 - a));
                dz = prev;
            }
            grads.push(Layer { weights: gw, bias: gb });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// Mean loss over a batch without gradients.
    pub fn loss_batch(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, delta: f64) -> Result<f64> {
        let pred = self.forward_batch(x)?;
        if pred.dim() != y.dim() {
            return Err(Error::ShapeMismatch("targets do not match outputs".into()));
        }
        let total: f64 = pred.iter().zip(y.iter()).map(|(p, t)| huber(p - t, delta).0).sum();
        Ok(total / pred.len() as f64)
    }

    /// Errors with `VersionMismatch` unless the model was built for `f` and `s`.
    pub fn check_compatible(&self, f: usize, s: usize) -> Result<()> {
        if self.meta.f != f || self.meta.s != s {
            return Err(Error::VersionMismatch(format!(
                "model built for f={} s={}, requested f={f} s={s}",
                self.meta.f, self.meta.s
            )));
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "layers {:?} (hidden {:?}), sigmoid hidden, hard-sigmoid output, f={} s={} l_ref={} spacing={}",
            self.layer_sizes(),
            self.hidden_sizes(),
            self.meta.f,
            self.meta.s,
            self.meta.l_ref,
            self.meta.spacing
        )
    }
}
