use serde::{Deserialize, Serialize};

use super::{ModelError, ModelParams};

/// Optimizer and minibatch settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// epochs without improvement before stopping
    pub patience: usize,
    /// relative validation-loss change over the patience window below which training stops
    pub min_rel_change: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            batch_size: 32,
            dropout: 0.2,
            l2: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 100,
            patience: 10,
            min_rel_change: 5e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l2 >= 0.0) {
            return bad("L2 coefficient must be non-negative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("moment decay rates must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.min_rel_change >= 0.0) {
            return bad("minimum relative change must be non-negative");
        }
        Ok(())
    }
}

/// Adam first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(p: &ModelParams) -> Self {
        Self { m: p.zeros_like(), v: p.zeros_like(), step: 0 }
    }
}

/// One Adam update with the L2 term added to the gradient.
pub fn adam_step(
    p: &mut ModelParams,
    grad: &ModelParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), ModelError> {
    p.check_shape(grad)?;
    p.check_shape(&state.m)?;
    if !grad.is_finite() {
        return Err(ModelError::NonFinite("gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (i, (w, g)) in p.as_mut_slice().iter_mut().zip(grad.as_slice()).enumerate() {
        let g = g + cfg.l2 * *w;
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    if !p.is_finite() {
        return Err(ModelError::NonFinite("parameters after update".into()));
    }
    Ok(())
}
