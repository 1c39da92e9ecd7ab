use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{forward_sequence, DropoutMode, Tape};
use super::{adam_step, AdamState, ModelError, ModelParams, TrainConfig, Vocabulary};
use crate::canon::DfsCode;

/// Sequences per gradient-accumulation chunk. Fixed so the summation order,
/// and hence the result, does not depend on the thread count.
const CHUNK: usize = 8;

/// How per-sequence gradients of a batch are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

impl std::str::FromStr for Reduction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean" => Ok(Self::Mean),
            "sum" => Ok(Self::Sum),
            _ => Err(format!("unknown reduction {s:?}, expected mean or sum")),
        }
    }
}

/// Teacher-forced passes over a batch. Sequence `i` draws its dropout masks
/// from stream `i` of a generator seeded with `seed`.
pub fn batch_tapes(
    p: &ModelParams,
    codes: &[&DfsCode],
    v: &Vocabulary,
    dropout: f64,
    seed: u64,
) -> Result<Vec<Tape>, ModelError> {
    codes
        .par_iter()
        .enumerate()
        .map(|(i, code)| {
            if dropout > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                forward_sequence(p, code, v, &mut DropoutMode::Train { p: dropout, rng: &mut rng })
            } else {
                forward_sequence(p, code, v, &mut DropoutMode::Eval)
            }
        })
        .collect()
}

/// Combined gradient of the given tapes. An empty list gives zeros.
pub fn tapes_gradient(p: &ModelParams, tapes: &[&Tape], reduction: Reduction) -> ModelParams {
    let scale = match reduction {
        Reduction::Mean if !tapes.is_empty() => 1.0 / tapes.len() as f64,
        _ => 1.0,
    };
    let partial: Vec<ModelParams> = tapes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = p.zeros_like();
            for t in chunk {
                t.backward(p, &mut g, scale);
            }
            g
        })
        .collect();
    let mut total = p.zeros_like();
    for g in &partial {
        total.add_scaled(1.0, g);
    }
    total
}

/// Per-sequence losses and the combined gradient of one batch.
pub fn batch_gradient(
    p: &ModelParams,
    codes: &[&DfsCode],
    v: &Vocabulary,
    dropout: f64,
    seed: u64,
    reduction: Reduction,
) -> Result<(Vec<f64>, ModelParams), ModelError> {
    let tapes = batch_tapes(p, codes, v, dropout, seed)?;
    let refs: Vec<&Tape> = tapes.iter().collect();
    Ok((tapes.iter().map(Tape::loss).collect(), tapes_gradient(p, &refs, reduction)))
}

/// Per-sequence losses in evaluation mode.
pub fn sequence_losses(p: &ModelParams, codes: &[DfsCode], v: &Vocabulary) -> Result<Vec<f64>, ModelError> {
    codes.par_iter().map(|c| Ok(forward_sequence(p, c, v, &mut DropoutMode::Eval)?.loss())).collect()
}

/// Mean per-sequence loss in evaluation mode.
pub fn mean_loss(p: &ModelParams, codes: &[DfsCode], v: &Vocabulary) -> Result<f64, ModelError> {
    if codes.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    Ok(sequence_losses(p, codes, v)?.iter().sum::<f64>() / codes.len() as f64)
}

/// Mean loss per generated tuple (EOS step included), in evaluation mode.
pub fn mean_tuple_loss(p: &ModelParams, codes: &[DfsCode], v: &Vocabulary) -> Result<f64, ModelError> {
    if codes.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let total: f64 = sequence_losses(p, codes, v)?.iter().sum();
    let steps: usize = codes.iter().map(|c| c.len() + 1).sum();
    Ok(total / steps as f64)
}

/// Stops on a stalled or flat validation loss and remembers the best parameters.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_rel_change: f64,
    history: Vec<f64>,
    best: Option<(f64, ModelParams, usize)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_rel_change: f64) -> Self {
        Self { patience, min_rel_change, history: Vec::new(), best: None, since_best: 0 }
    }

    /// Records one validation loss; returns true when training should stop.
    pub fn observe(&mut self, loss: f64, params: &ModelParams) -> bool {
        let epoch = self.history.len();
        self.history.push(loss);
        match &self.best {
            Some((b, _, _)) if loss >= *b => self.since_best += 1,
            _ => {
                self.best = Some((loss, params.clone(), epoch));
                self.since_best = 0;
            }
        }
        if self.since_best >= self.patience {
            return true;
        }
        let n = self.history.len();
        if n > self.patience {
            let then = self.history[n - 1 - self.patience];
            let rel = (loss - then).abs() / then.abs().max(f64::MIN_POSITIVE);
            if rel < self.min_rel_change {
                return true;
            }
        }
        false
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.0)
    }

    /// Index of the observation that gave the best loss.
    pub fn best_index(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.2)
    }

    pub fn into_best(self) -> Option<ModelParams> {
        self.best.map(|b| b.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// mean per-sequence loss over the epoch's batches, dropout active
    pub train_loss: f64,
    /// mean per-sequence loss on the monitored set, evaluation mode
    pub monitor_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// parameters with the best monitored loss
    pub params: ModelParams,
    /// parameters after the last epoch
    pub last: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub optimizer_steps: u64,
}

/// One minibatch as seen by a training loop: the batch, its dropout seed,
/// and a running batch counter starting at 0.
pub struct Batch<'a> {
    pub codes: Vec<&'a DfsCode>,
    pub seed: u64,
    pub index: usize,
}

/// Epoch loop shared by plain, vanilla and self-paced training.
///
/// Each epoch shuffles `train` with a generator seeded from `cfg.seed`, cuts
/// it into batches of `cfg.batch_size`, and hands each batch to `step`,
/// which returns the batch's summed loss. After each epoch the monitored
/// loss (on `validation`, or on `train` when `validation` is empty) drives
/// [`EarlyStopping`].
pub fn train_with<F>(
    params: ModelParams,
    train: &[DfsCode],
    v: &Vocabulary,
    cfg: &TrainConfig,
    validation: &[DfsCode],
    mut step: F,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, ModelError>
where
    F: FnMut(&mut ModelParams, &mut AdamState, &Batch) -> Result<f64, ModelError>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    params.dims().check_vocabulary(v)?;
    let monitor = if validation.is_empty() { train } else { validation };
    let mut p = params;
    let mut opt = AdamState::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_rel_change);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch_index = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch = Batch { codes: idx.iter().map(|&i| &train[i]).collect(), seed: rng.gen(), index: batch_index };
            batch_index += 1;
            total += step(&mut p, &mut opt, &batch)?;
        }
        let record =
            EpochRecord { epoch, train_loss: total / train.len() as f64, monitor_loss: mean_loss(&p, monitor, v)? };
        on_epoch(&record);
        history.push(record);
        if stopper.observe(history.last().unwrap().monitor_loss, &p) {
            break;
        }
    }
    let best_epoch = stopper.best_index();
    let best = stopper.into_best().unwrap_or_else(|| p.clone());
    Ok(TrainOutcome { params: best, last: p, history, best_epoch, optimizer_steps: opt.step })
}

/// A standard Adam minibatch step on the mean per-sequence loss.
pub fn adam_batch_step(
    p: &mut ModelParams,
    opt: &mut AdamState,
    batch: &Batch,
    v: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<f64, ModelError> {
    let (losses, grad) = batch_gradient(p, &batch.codes, v, cfg.dropout, batch.seed, Reduction::Mean)?;
    adam_step(p, &grad, opt, cfg)?;
    Ok(losses.iter().sum())
}

/// Minibatch Adam training with early stopping; returns the best parameters.
pub fn train_epochs(
    params: ModelParams,
    train: &[DfsCode],
    v: &Vocabulary,
    cfg: &TrainConfig,
    validation: &[DfsCode],
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, ModelError> {
    train_with(params, train, v, cfg, validation, |p, opt, b| adam_batch_step(p, opt, b, v, cfg), on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_dataset, LabelOrder};
    use crate::nn::{build_vocabulary, sequence_grad, ModelDims};

    fn setup() -> (Vocabulary, Vec<DfsCode>) {
        let text = "t # 0\nv 0 A\nv 1 B\nv 2 A\nv 3 C\ne 0 1 x\ne 1 2 x\ne 2 3 y\ne 0 2 y\n\
                    t # 1\nv 0 A\nv 1 C\ne 0 1 x\n\
                    t # 2\nv 0 B\nv 1 B\nv 2 C\ne 0 1 y\ne 1 2 x\n";
        let d = parse_dataset("d", text, false).unwrap();
        let v = build_vocabulary(&[&d], LabelOrder::FirstAppearance).unwrap();
        let codes = v.encode_dataset(&d).unwrap();
        (v, codes)
    }

    #[test]
    fn batch_mean_is_mean_of_sequence_gradients() {
        let (v, codes) = setup();
        let p = ModelParams::init(ModelDims::new(&v, 4, 5, 1, 6), 2).unwrap();
        let refs: Vec<&DfsCode> = codes.iter().collect();
        let (_, g) = batch_gradient(&p, &refs, &v, 0.0, 0, Reduction::Mean).unwrap();
        let mut expect = p.zeros_like();
        for c in &codes {
            expect.add_scaled(1.0 / 3.0, &sequence_grad(&p, c, &v).unwrap());
        }
        for (a, b) in g.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gradient_does_not_depend_on_thread_count() {
        let (v, codes) = setup();
        let many: Vec<DfsCode> = codes.iter().cycle().take(30).cloned().collect();
        let refs: Vec<&DfsCode> = many.iter().collect();
        let p = ModelParams::init(ModelDims::new(&v, 4, 5, 1, 6), 2).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| batch_gradient(&p, &refs, &v, 0.2, 11, Reduction::Mean).unwrap().1)
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn early_stopping_rules() {
        let p = ModelParams::zeros(ModelDims { vocab_sizes: [2; 5], embed: 1, hidden: 1, layers: 1, head_hidden: 1 })
            .unwrap();
        let mut s = EarlyStopping::new(0, 5e-4);
        assert!(s.observe(1.0, &p));

        let mut s = EarlyStopping::new(2, 5e-4);
        assert!(!s.observe(3.0, &p));
        assert!(!s.observe(2.0, &p));
        assert!(!s.observe(2.5, &p));
        assert!(s.observe(2.1, &p), "two epochs without improvement");
        assert_eq!(s.best_loss(), Some(2.0));
        assert_eq!(s.best_index(), Some(1));

        let mut s = EarlyStopping::new(2, 5e-4);
        assert!(!s.observe(1.0, &p));
        assert!(!s.observe(0.9, &p));
        assert!(s.observe(0.99999, &p), "flat over the window");
    }

    #[test]
    fn patience_zero_runs_one_epoch() {
        let (v, codes) = setup();
        let p = ModelParams::init(ModelDims::new(&v, 4, 5, 1, 6), 2).unwrap();
        let cfg = TrainConfig { patience: 0, batch_size: 2, ..TrainConfig::default() };
        let out = train_epochs(p, &codes, &v, &cfg, &[], &mut |_| {}).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.optimizer_steps, 2);
    }

    #[test]
    fn training_is_deterministic() {
        let (v, codes) = setup();
        let p = ModelParams::init(ModelDims::new(&v, 4, 5, 1, 6), 2).unwrap();
        let cfg = TrainConfig { max_epochs: 5, batch_size: 2, seed: 4, ..TrainConfig::default() };
        let a = train_epochs(p.clone(), &codes, &v, &cfg, &[], &mut |_| {}).unwrap();
        let b = train_epochs(p, &codes, &v, &cfg, &[], &mut |_| {}).unwrap();
        assert_eq!(a.last, b.last);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn memorizes_a_repeated_graph() {
        let (v, codes) = setup();
        let copies: Vec<DfsCode> = std::iter::repeat(codes[0].clone()).take(20).collect();
        let p = ModelParams::init(ModelDims::new(&v, 64, 64, 1, 64), 1).unwrap();
        let initial = mean_loss(&p, &copies, &v).unwrap();
        let cfg = TrainConfig { max_epochs: 200, patience: 200, min_rel_change: 0.0, ..TrainConfig::default() };
        let out = train_epochs(p, &copies, &v, &cfg, &[], &mut |_| {}).unwrap();
        let last = out.history.last().unwrap().monitor_loss;
        assert!(last < 0.1 * initial, "{last} vs initial {initial}");
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let (v, _) = setup();
        let p = ModelParams::init(ModelDims::new(&v, 4, 5, 1, 6), 2).unwrap();
        assert!(matches!(
            train_epochs(p, &[], &v, &TrainConfig::default(), &[], &mut |_| {}),
            Err(ModelError::EmptyTrainingSet)
        ));
    }
}
