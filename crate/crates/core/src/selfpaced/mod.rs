//! Self-paced fine-tuning on a small target dataset.
//!
//! A sequence contributes to a batch's loss only while its loss is below a
//! threshold `lambda`, which is multiplied by `gamma` after every batch, so
//! easy graphs are learned first and harder ones join as the threshold grows.
//! Vanilla fine-tuning is the same loop with every sequence selected.

use serde::{Deserialize, Serialize};

use crate::canon::DfsCode;
use crate::nn::{
    adam_step, batch_tapes, sequence_losses, tapes_gradient, train_epochs, train_with, AdamState, Batch, EpochRecord,
    ModelError, ModelParams, Reduction, Tape, TrainConfig, TrainOutcome, Vocabulary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfPacedConfig {
    /// initial threshold; `None` picks just above the `lambda_quantile`
    /// quantile of the initial per-sequence losses
    pub lambda0: Option<f64>,
    pub lambda_quantile: f64,
    /// threshold growth per batch
    pub gamma: f64,
}

impl Default for SelfPacedConfig {
    fn default() -> Self {
        Self { lambda0: None, lambda_quantile: 0.25, gamma: 1.1 }
    }
}

impl SelfPacedConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(l) = self.lambda0 {
            if !(l > 0.0) {
                return Err(ModelError::Config("initial threshold must be positive".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda_quantile) {
            return Err(ModelError::Config("threshold quantile must lie in [0, 1]".into()));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(ModelError::Config("growth factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// `beta_i = loss_i < lambda`.
pub fn select_samples(losses: &[f64], lambda: f64) -> Vec<bool> {
    losses.iter().map(|&l| l < lambda).collect()
}

/// Threshold used for batch `n` (counting from 0).
pub fn lambda_at(lambda0: f64, gamma: f64, n: usize) -> f64 {
    lambda0 * gamma.powi(n as i32)
}

/// The smallest threshold that selects the `q` quantile (nearest rank) of `losses`.
pub fn initial_lambda(losses: &[f64], q: f64) -> f64 {
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1].next_up()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub selected: usize,
    /// summed loss over the whole batch, dropout active
    pub batch_loss: f64,
}

/// One self-paced Adam step: only sequences with loss below `lambda` enter
/// the gradient, which is averaged over them. Without any selected sequence
/// the parameters and optimizer state are left unchanged.
pub fn self_paced_batch_step(
    p: &mut ModelParams,
    opt: &mut AdamState,
    batch: &[&DfsCode],
    seed: u64,
    lambda: f64,
    v: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<StepResult, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let tapes = batch_tapes(p, batch, v, cfg.dropout, seed)?;
    let losses: Vec<f64> = tapes.iter().map(Tape::loss).collect();
    let beta = select_samples(&losses, lambda);
    let chosen: Vec<&Tape> = tapes.iter().zip(&beta).filter(|(_, &b)| b).map(|(t, _)| t).collect();
    let selected = chosen.len();
    if selected > 0 {
        let grad = tapes_gradient(p, &chosen, Reduction::Mean);
        adam_step(p, &grad, opt, cfg)?;
    }
    Ok(StepResult { selected, batch_loss: losses.iter().sum() })
}

/// One line of the fine-tuning log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRecord {
    pub batch: usize,
    pub epoch: usize,
    pub lambda: f64,
    pub selected: usize,
    pub size: usize,
    /// mean per-sequence loss of the batch
    pub loss: f64,
}

impl BatchRecord {
    pub const HEADER: &'static str = "batch\tepoch\tlambda\tselected\tsize\tloss";

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{:e}\t{}\t{}\t{:.6}", self.batch, self.epoch, self.lambda, self.selected, self.size, self.loss)
    }
}

#[derive(Debug, Clone)]
pub struct FineTuneOutcome {
    pub train: TrainOutcome,
    pub lambda0: f64,
    pub batches: Vec<BatchRecord>,
}

/// Self-paced fine-tuning from `theta` with the shared epoch loop and
/// stopping rule of [`train_with`].
#[allow(clippy::too_many_arguments)]
pub fn fine_tune(
    theta: ModelParams,
    target: &[DfsCode],
    v: &Vocabulary,
    spc: &SelfPacedConfig,
    cfg: &TrainConfig,
    validation: &[DfsCode],
    on_batch: &mut dyn FnMut(&BatchRecord),
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<FineTuneOutcome, ModelError> {
    spc.validate()?;
    if target.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let lambda0 = match spc.lambda0 {
        Some(l) => l,
        None => initial_lambda(&sequence_losses(&theta, target, v)?, spc.lambda_quantile),
    };
    let mut batches = Vec::new();
    let mut current_epoch = 0usize;
    let mut seen_in_epoch = 0usize;
    let per_epoch = target.len().div_ceil(cfg.batch_size);
    let train = train_with(
        theta,
        target,
        v,
        cfg,
        validation,
        |p: &mut ModelParams, opt: &mut AdamState, b: &Batch| {
            let lambda = lambda_at(lambda0, spc.gamma, b.index);
            let r = self_paced_batch_step(p, opt, &b.codes, b.seed, lambda, v, cfg)?;
            let rec = BatchRecord {
                batch: b.index,
                epoch: current_epoch,
                lambda,
                selected: r.selected,
                size: b.codes.len(),
                loss: r.batch_loss / b.codes.len() as f64,
            };
            seen_in_epoch += 1;
            if seen_in_epoch == per_epoch {
                seen_in_epoch = 0;
                current_epoch += 1;
            }
            on_batch(&rec);
            batches.push(rec);
            Ok(r.batch_loss)
        },
        on_epoch,
    )?;
    Ok(FineTuneOutcome { train, lambda0, batches })
}

/// Standard minibatch fine-tuning from `theta`.
pub fn vanilla_fine_tune(
    theta: ModelParams,
    target: &[DfsCode],
    v: &Vocabulary,
    cfg: &TrainConfig,
    validation: &[DfsCode],
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, ModelError> {
    train_epochs(theta, target, v, cfg, validation, on_epoch)
}
