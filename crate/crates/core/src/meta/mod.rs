//! Reptile meta-training across auxiliary datasets.
//!
//! Each meta-iteration samples one dataset uniformly, takes `K` plain
//! gradient steps from the current parameters on minibatches of that
//! dataset, and moves the parameters a fraction `epsilon` of the way toward
//! the adapted ones.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon::DfsCode;
use crate::nn::{
    batch_gradient, mean_loss, sequence_losses, EarlyStopping, ModelError, ModelParams, Reduction, TrainConfig,
    Vocabulary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// inner gradient steps per meta-iteration
    pub inner_steps: usize,
    /// meta step size
    pub epsilon: f64,
    /// inner-loop learning rate
    pub inner_lr: f64,
    /// sequences per inner step
    pub batch_size: usize,
    /// how a batch's sequence gradients are combined in the inner loop
    pub reduction: Reduction,
    /// meta-iteration budget
    pub iterations: usize,
    /// iterations between validation points; 0 disables validation
    pub validate_every: usize,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            inner_steps: 15,
            epsilon: 0.8,
            inner_lr: 0.003,
            batch_size: 32,
            reduction: Reduction::Sum,
            iterations: 1000,
            validate_every: 10,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if self.inner_steps == 0 {
            return bad("inner step count must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("meta step size must lie in [0, 1]");
        }
        if !(self.inner_lr > 0.0 && self.inner_lr.is_finite()) {
            return bad("inner learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("inner batch size must be at least 1");
        }
        Ok(())
    }
}

/// One auxiliary dataset as seen by meta-training.
#[derive(Debug, Clone)]
pub struct MetaTask {
    pub name: String,
    pub train: Vec<DfsCode>,
    /// held-out codes for the stopping rule; may be empty
    pub validation: Vec<DfsCode>,
}

/// `K` plain gradient steps from `theta` on minibatches of `codes`.
///
/// Each step draws `min(B, |codes|)` distinct codes and a dropout seed from
/// `rng`. The input parameters are not modified.
#[allow(clippy::too_many_arguments)]
pub fn inner_loop(
    theta: &ModelParams,
    codes: &[DfsCode],
    v: &Vocabulary,
    steps: usize,
    lr: f64,
    batch_size: usize,
    dropout: f64,
    reduction: Reduction,
    rng: &mut ChaCha8Rng,
) -> Result<ModelParams, ModelError> {
    if codes.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut p = theta.clone();
    for _ in 0..steps {
        let batch: Vec<&DfsCode> =
            sample(rng, codes.len(), batch_size.min(codes.len())).into_iter().map(|i| &codes[i]).collect();
        let seed = rng.gen();
        let (_, grad) = batch_gradient(&p, &batch, v, dropout, seed, reduction)?;
        p.add_scaled(-lr, &grad);
        if !p.is_finite() {
            return Err(ModelError::NonFinite("inner-loop parameters".into()));
        }
    }
    Ok(p)
}

/// `theta + epsilon * (adapted - theta)`, written as a convex combination so
/// that `epsilon` of 0 and 1 reproduce the endpoints exactly.
pub fn reptile_update(theta: &ModelParams, adapted: &ModelParams, epsilon: f64) -> Result<ModelParams, ModelError> {
    if !theta.same_shape(adapted) {
        return Err(ModelError::Dimension("parameter shapes differ".into()));
    }
    if epsilon == 1.0 {
        return Ok(adapted.clone());
    }
    let mut out = theta.clone();
    for (o, (a, b)) in out.as_mut_slice().iter_mut().zip(theta.as_slice().iter().zip(adapted.as_slice())) {
        *o = (1.0 - epsilon) * a + epsilon * b;
    }
    Ok(out)
}

/// One line of the meta-training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaRecord {
    pub iteration: usize,
    pub dataset: String,
    /// mean loss of the first inner batch before the inner loop, evaluation mode
    pub inner_start_loss: f64,
    /// mean loss of the same batch after the inner loop
    pub inner_end_loss: f64,
    pub validation_loss: Option<f64>,
}

impl MetaRecord {
    pub const HEADER: &'static str = "iteration\tdataset\tinner_start_loss\tinner_end_loss\tvalidation_loss";

    pub fn to_tsv(&self) -> String {
        let mut s = format!("{}\t{}\t{:.6}\t{:.6}\t", self.iteration, self.dataset, self.inner_start_loss, self.inner_end_loss);
        match self.validation_loss {
            Some(v) => write!(s, "{v:.6}").unwrap(),
            None => s.push('-'),
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct MetaOutcome {
    /// parameters with the best validation loss, or the last ones without validation
    pub params: ModelParams,
    pub last: ModelParams,
    pub log: Vec<MetaRecord>,
    pub iterations: usize,
}

/// Mean over tasks of the mean per-sequence validation loss.
pub fn meta_validation_loss(p: &ModelParams, tasks: &[MetaTask], v: &Vocabulary) -> Result<Option<f64>, ModelError> {
    let with_val: Vec<&MetaTask> = tasks.iter().filter(|t| !t.validation.is_empty()).collect();
    if with_val.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for t in &with_val {
        total += mean_loss(p, &t.validation, v)?;
    }
    Ok(Some(total / with_val.len() as f64))
}

/// Reptile meta-training.
///
/// Dataset choice and inner batches use separate streams of a generator
/// seeded with `mc.seed`. Dropout comes from `tc.dropout`; the stopping
/// rule uses `tc.patience` and `tc.min_rel_change`, counted in validation
/// points.
pub fn meta_train(
    theta: ModelParams,
    tasks: &[MetaTask],
    v: &Vocabulary,
    mc: &MetaConfig,
    tc: &TrainConfig,
    on_record: &mut dyn FnMut(&MetaRecord),
) -> Result<MetaOutcome, ModelError> {
    mc.validate()?;
    tc.validate()?;
    if tasks.is_empty() {
        return Err(ModelError::Config("meta-training needs at least one dataset".into()));
    }
    if let Some(t) = tasks.iter().find(|t| t.train.is_empty()) {
        return Err(ModelError::Config(format!("dataset {} has no training graphs", t.name)));
    }
    theta.dims().check_vocabulary(v)?;
    let mut pick = ChaCha8Rng::seed_from_u64(mc.seed);
    let mut inner = ChaCha8Rng::seed_from_u64(mc.seed);
    inner.set_stream(1);

    let mut p = theta;
    let mut log = Vec::new();
    let mut stopper = EarlyStopping::new(tc.patience, tc.min_rel_change);
    let mut validated = false;
    let mut done = 0;
    for it in 0..mc.iterations {
        let task = &tasks[pick.gen_range(0..tasks.len())];
        // The first inner batch is drawn again from a copy of the generator
        // to report losses before and after adaptation.
        let probe_idx = sample(&mut inner.clone(), task.train.len(), mc.batch_size.min(task.train.len()));
        let probe: Vec<DfsCode> = probe_idx.into_iter().map(|i| task.train[i].clone()).collect();
        let start = mean(&sequence_losses(&p, &probe, v)?);
        let adapted =
            inner_loop(&p, &task.train, v, mc.inner_steps, mc.inner_lr, mc.batch_size, tc.dropout, mc.reduction, &mut inner)?;
        let end = mean(&sequence_losses(&adapted, &probe, v)?);
        p = reptile_update(&p, &adapted, mc.epsilon)?;
        done = it + 1;

        let mut validation_loss = None;
        let mut stop = false;
        if mc.validate_every > 0 && done % mc.validate_every == 0 {
            validation_loss = meta_validation_loss(&p, tasks, v)?;
            if let Some(l) = validation_loss {
                validated = true;
                stop = stopper.observe(l, &p);
            }
        }
        let record = MetaRecord {
            iteration: it,
            dataset: task.name.clone(),
            inner_start_loss: start,
            inner_end_loss: end,
            validation_loss,
        };
        on_record(&record);
        log.push(record);
        if stop {
            break;
        }
    }
    let best = if validated { stopper.into_best().unwrap_or_else(|| p.clone()) } else { p.clone() };
    Ok(MetaOutcome { params: best, last: p, log, iterations: done })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_dataset, LabelOrder};
    use crate::nn::{build_vocabulary, ModelDims};

    fn setup() -> (Vocabulary, Vec<DfsCode>) {
        let text = "t # 0\nv 0 A\nv 1 B\nv 2 A\ne 0 1 x\ne 1 2 x\ne 0 2 y\n\
                    t # 1\nv 0 A\nv 1 B\ne 0 1 x\n\
                    t # 2\nv 0 B\nv 1 B\nv 2 A\ne 0 1 y\ne 1 2 x\n";
        let d = parse_dataset("d", text, false).unwrap();
        let v = build_vocabulary(&[&d], LabelOrder::FirstAppearance).unwrap();
        let codes = v.encode_dataset(&d).unwrap();
        (v, codes)
    }

    fn toy(v: &Vocabulary) -> ModelParams {
        ModelParams::init(ModelDims::new(v, 2, 2, 1, 2), 5).unwrap()
    }

    #[test]
    fn reptile_endpoints_and_midpoint() {
        let (v, _) = setup();
        let a = toy(&v);
        let b = ModelParams::init(a.dims().clone(), 6).unwrap();
        assert_eq!(reptile_update(&a, &b, 0.0).unwrap(), a);
        assert_eq!(reptile_update(&a, &b, 1.0).unwrap(), b);

        let z = a.zeros_like();
        let mut k = a.zeros_like();
        k.as_mut_slice()[..3].copy_from_slice(&[1.0, 2.0, -1.0]);
        let m = reptile_update(&z, &k, 0.8).unwrap();
        assert_eq!(&m.as_slice()[..3], &[0.8, 1.6, -0.8]);
    }

    #[test]
    fn inner_loop_leaves_input_alone() {
        let (v, codes) = setup();
        let theta = toy(&v);
        let snapshot = theta.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = inner_loop(&theta, &codes, &v, 3, 0.1, 2, 0.0, Reduction::Sum, &mut rng).unwrap();
        assert_eq!(theta, snapshot);
        assert_ne!(out, theta);
    }

    #[test]
    fn one_inner_step_is_one_gradient_step() {
        let (v, codes) = setup();
        let theta = toy(&v);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = inner_loop(&theta, &codes, &v, 1, 0.1, 3, 0.0, Reduction::Sum, &mut rng).unwrap();
        let refs: Vec<&DfsCode> = codes.iter().collect();
        let (_, g) = batch_gradient(&theta, &refs, &v, 0.0, 0, Reduction::Sum).unwrap();
        let mut expect = theta.clone();
        expect.add_scaled(-0.1, &g);
        for (a, b) in out.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn two_inner_steps_by_hand() {
        let (v, codes) = setup();
        let theta = toy(&v);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = inner_loop(&theta, &codes, &v, 2, 0.05, 3, 0.0, Reduction::Sum, &mut rng).unwrap();
        let refs: Vec<&DfsCode> = codes.iter().collect();
        let mut p = theta.clone();
        for _ in 0..2 {
            let mut g = p.zeros_like();
            for c in &refs {
                g.add_scaled(1.0, &crate::nn::sequence_grad(&p, c, &v).unwrap());
            }
            p.add_scaled(-0.05, &g);
        }
        for (a, b) in out.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn composite_update_with_one_inner_step() {
        let (v, codes) = setup();
        let theta = toy(&v);
        let task = MetaTask { name: "d".into(), train: codes.clone(), validation: vec![] };
        let mc = MetaConfig { inner_steps: 1, epsilon: 0.8, inner_lr: 0.1, batch_size: 3, iterations: 1, ..MetaConfig::default() };
        let tc = TrainConfig { dropout: 0.0, ..TrainConfig::default() };
        let out = meta_train(theta.clone(), &[task], &v, &mc, &tc, &mut |_| {}).unwrap();
        let refs: Vec<&DfsCode> = codes.iter().collect();
        let (_, g) = batch_gradient(&theta, &refs, &v, 0.0, 0, Reduction::Sum).unwrap();
        let mut expect = theta.clone();
        expect.add_scaled(-0.8 * 0.1, &g);
        for (a, b) in out.last.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn single_dataset_full_step_is_plain_training() {
        let (v, codes) = setup();
        let theta = toy(&v);
        let task = MetaTask { name: "d".into(), train: codes.clone(), validation: vec![] };
        let mc = MetaConfig { inner_steps: 4, epsilon: 1.0, inner_lr: 0.05, batch_size: 2, iterations: 3, seed: 9, ..MetaConfig::default() };
        let tc = TrainConfig::default();
        let out = meta_train(theta.clone(), &[task], &v, &mc, &tc, &mut |_| {}).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rng.set_stream(1);
        let plain = inner_loop(&theta, &codes, &v, 12, 0.05, 2, tc.dropout, Reduction::Sum, &mut rng).unwrap();
        assert_eq!(out.last, plain);
    }

    #[test]
    fn zero_budget_returns_initialization() {
        let (v, codes) = setup();
        let theta = toy(&v);
        let task = MetaTask { name: "d".into(), train: codes, validation: vec![] };
        let mc = MetaConfig { iterations: 0, ..MetaConfig::default() };
        let out = meta_train(theta.clone(), &[task], &v, &mc, &TrainConfig::default(), &mut |_| {}).unwrap();
        assert_eq!(out.params, theta);
        assert!(out.log.is_empty());
    }

    #[test]
    fn log_lines_and_validation_cadence() {
        let (v, codes) = setup();
        let tasks = vec![
            MetaTask { name: "a".into(), train: codes[..2].to_vec(), validation: codes[2..].to_vec() },
            MetaTask { name: "b".into(), train: codes[1..].to_vec(), validation: codes[..1].to_vec() },
        ];
        let mc = MetaConfig { inner_steps: 2, iterations: 6, validate_every: 3, batch_size: 2, ..MetaConfig::default() };
        let tc = TrainConfig { patience: 100, ..TrainConfig::default() };
        let mut lines = Vec::new();
        let out = meta_train(toy(&v), &tasks, &v, &mc, &tc, &mut |r| lines.push(r.to_tsv())).unwrap();
        assert_eq!(out.log.len(), 6);
        assert!(out.log[2].validation_loss.is_some() && out.log[1].validation_loss.is_none());
        assert!(lines[0].ends_with("\t-"));
        assert_eq!(lines[0].split('\t').count(), MetaRecord::HEADER.split('\t').count());
    }

    #[test]
    fn empty_collection_is_an_error() {
        let (v, _) = setup();
        assert!(meta_train(toy(&v), &[], &v, &MetaConfig::default(), &TrainConfig::default(), &mut |_| {}).is_err());
    }
}
