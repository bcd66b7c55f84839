use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{MlpModel, NadamState, TrainConfig};
use crate::error::{Error, Result};
use crate::windows::Window;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
}

/// Stacks window features and targets into row matrices.
pub fn windows_to_arrays(windows: &[Window], in_len: usize, out_len: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = windows.len();
    let mut x = Array2::zeros((n, in_len));
    let mut y = Array2::zeros((n, out_len));
    for (i, w) in windows.iter().enumerate() {
        if w.features.len() != in_len || w.targets.len() != out_len {
            return Err(Error::ShapeMismatch(format!(
                "window {} has {}+{} values, model wants {in_len}+{out_len}",
                w.center_index,
                w.features.len(),
                w.targets.len()
            )));
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&w.features[..]));
        y.row_mut(i).assign(&ndarray::ArrayView1::from(&w.targets[..]));
    }
    Ok((x, y))
}

pub fn train(model: &mut MlpModel, windows: &[Window], cfg: &TrainConfig) -> Result<Vec<f64>> {
    train_with(model, windows, cfg, |_, _| {})
}

/// Minibatch Nadam training; the window order is reshuffled every epoch
/// from a stream seeded by `cfg.seed`. Returns the mean training loss of
/// each epoch and calls `on_epoch` after every epoch.
pub fn train_with<F>(model: &mut MlpModel, windows: &[Window], cfg: &TrainConfig, mut on_epoch: F) -> Result<Vec<f64>>
where
    F: FnMut(&EpochReport, &MlpModel),
{
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (x, y) = windows_to_arrays(windows, model.input_len(), model.output_len())?;
    let n = windows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut state = NadamState::new(model.param_count());
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let (loss, grads) = model.backward_batch(xb.view(), yb.view(), cfg.huber_delta)?;
            total += loss * batch.len() as f64;
            let tensors = model.layers.iter_mut().zip(&grads.layers).flat_map(|(layer, g)| {
                [
                    (layer.weights.as_slice_mut().unwrap(), g.weights.as_slice().unwrap()),
                    (layer.bias.as_slice_mut().unwrap(), g.bias.as_slice().unwrap()),
                ]
            });
            state.step_tensors(tensors, cfg)?;
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::ShapeMismatch(format!("training diverged at epoch {epoch}")));
        }
        history.push(mean);
        on_epoch(
            &EpochReport {
                epoch,
                train_loss: mean,
            },
            model,
        );
    }
    model.train_config = *cfg;
    Ok(history)
}
