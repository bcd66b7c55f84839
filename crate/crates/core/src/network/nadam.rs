use crate::error::{Error, Result};

use super::TrainConfig;

/// Nadam moment estimates over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NadamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl NadamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Advances the step counter once and updates several parameter
    /// tensors laid end to end in the state vectors.
    pub fn step_tensors<'a, I>(&mut self, tensors: I, cfg: &TrainConfig) -> Result<()>
    where
        I: IntoIterator<Item = (&'a mut [f64], &'a [f64])>,
    {
        self.t += 1;
        let c = Coefficients::new(self.t, cfg);
        let mut offset = 0;
        for (params, grads) in tensors {
            if params.len() != grads.len() || offset + params.len() > self.m.len() {
                return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
            }
            let end = offset + params.len();
            update(
                &mut self.m[offset..end],
                &mut self.v[offset..end],
                params,
                grads,
                &c,
                cfg,
            );
            offset = end;
        }
        if offset != self.m.len() {
            return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
        }
        Ok(())
    }
}

struct Coefficients {
    // 1 - beta1^(t+1), 1 - beta1^t, 1 - beta2^t
    m_next: f64,
    m_now: f64,
    v_now: f64,
}

impl Coefficients {
    fn new(t: u64, cfg: &TrainConfig) -> Self {
        let t = t as i32;
        Self {
            m_next: 1.0 - cfg.beta1.powi(t + 1),
            m_now: 1.0 - cfg.beta1.powi(t),
            v_now: 1.0 - cfg.beta2.powi(t),
        }
    }
}

fn update(m: &mut [f64], v: &mut [f64], params: &mut [f64], grads: &[f64], c: &Coefficients, cfg: &TrainConfig) {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = b1 * m[i] / c.m_next + (1.0 - b1) * g / c.m_now;
        let v_hat = v[i] / c.v_now;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One Nesterov-accelerated Adam update of a flat parameter vector.
pub fn nadam_step(state: &mut NadamState, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.v.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step_tensors([(params, grads)], cfg)
}
