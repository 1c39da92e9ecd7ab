//! Autoregressive sampling of DFS codes and their conversion into graphs.
//!
//! Each step samples the five components independently from their softmax
//! heads and feeds the sampled tuple back as the next input. A sequence ends
//! as soon as any component samples EOS; that last tuple is discarded.
//! Sampled sequences need not be valid DFS codes, so every attempt goes
//! through [`repair_code`] before it becomes a graph.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::{code_to_graph, repair_code, EdgeTuple, RepairMode, Violation};
use crate::graph::LabeledGraph;
use crate::nn::{forward_step, DropoutMode, HiddenState, ModelError, ModelParams, Token, TokenVector, Vocabulary};

/// Attempts allowed per requested graph.
pub const ATTEMPTS_PER_GRAPH: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// hard cap on tuples per sequence
    pub max_tuples: usize,
    pub temperature: f64,
    #[serde(with = "repair_mode_name")]
    pub repair: RepairMode,
    pub seed: u64,
    /// graphs requested
    pub count: usize,
}

impl GenerationConfig {
    pub fn new(max_tuples: usize, count: usize, seed: u64) -> Self {
        Self { max_tuples, temperature: 1.0, repair: RepairMode::Strict, seed, count }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_tuples == 0 {
            return Err(ModelError::Config("max_tuples must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::Config("temperature must be positive".into()));
        }
        if self.count == 0 {
            return Err(ModelError::Config("count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default length cap: one and a half times the largest training edge count.
pub fn default_max_tuples(max_training_edges: usize) -> usize {
    (max_training_edges * 3).div_ceil(2).max(1)
}

pub fn parse_repair_mode(s: &str) -> Option<RepairMode> {
    match s {
        "strict" => Some(RepairMode::Strict),
        "lenient" => Some(RepairMode::Lenient),
        _ => None,
    }
}

pub fn repair_mode_str(m: RepairMode) -> &'static str {
    match m {
        RepairMode::Strict => "strict",
        RepairMode::Lenient => "lenient",
    }
}

mod repair_mode_name {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &RepairMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(repair_mode_str(*m))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RepairMode, D::Error> {
        let s = String::deserialize(d)?;
        parse_repair_mode(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown repair mode {s:?}")))
    }
}

/// Index drawn from `softmax(logits / temperature)` by inverse CDF.
pub fn sample_index(logits: &[f64], temperature: f64, rng: &mut impl Rng) -> usize {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|z| ((z - m) / temperature).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, x) in w.iter().enumerate() {
        if u < *x {
            return i;
        }
        u -= x;
    }
    // rounding left u just above the last weight
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// One sampling step: advances the state and draws a raw token.
pub fn sample_step(
    p: &ModelParams,
    state: &HiddenState,
    x: &TokenVector,
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<(HiddenState, Token), ModelError> {
    let (next, heads) = forward_step(p, state, x, &mut DropoutMode::Eval)?;
    let mut tok = [0; 5];
    for (k, h) in heads.iter().enumerate() {
        tok[k] = sample_index(h, temperature, rng);
    }
    Ok((next, tok))
}

/// A sampled tuple sequence before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSequence {
    pub tuples: Vec<EdgeTuple>,
    /// the length cap was reached before EOS
    pub truncated: bool,
}

pub fn sample_sequence(
    p: &ModelParams,
    v: &Vocabulary,
    gc: &GenerationConfig,
    rng: &mut impl Rng,
) -> Result<RawSequence, ModelError> {
    p.dims().check_vocabulary(v)?;
    let eos = v.eos_token();
    let mut state = HiddenState::zeros(p);
    let mut x = TokenVector::sos(v);
    let mut tuples = Vec::new();
    while tuples.len() < gc.max_tuples {
        let (next, tok) = sample_step(p, &state, &x, gc.temperature, rng)?;
        if tok.iter().zip(&eos).any(|(a, b)| a == b) {
            return Ok(RawSequence { tuples, truncated: false });
        }
        tuples.push(EdgeTuple::new(tok[0], tok[1], tok[2] as u32, tok[3] as u32, tok[4] as u32));
        x = TokenVector::from_token(&tok, v)?;
        state = next;
    }
    Ok(RawSequence { tuples, truncated: true })
}

/// Counts for one generation run; every attempt is accounted for.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GenerationReport {
    pub requested: usize,
    pub attempts: usize,
    pub emitted: usize,
    pub rejected_invalid: usize,
    /// sequences that hit the length cap, emitted or not
    pub truncated: usize,
    /// emitted graphs whose code needed lenient repair
    pub repaired: usize,
    /// rejection counts keyed by violation name
    pub reasons: BTreeMap<String, usize>,
}

impl GenerationReport {
    pub fn complete(&self) -> bool {
        self.emitted == self.requested
    }

    /// Fraction of attempts that produced a graph.
    pub fn validity(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.emitted as f64 / self.attempts as f64
        }
    }

    /// Tab-separated `key value` lines, then one `reason name count` line per
    /// rejection reason.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "requested\t{}", self.requested).unwrap();
        writeln!(s, "attempts\t{}", self.attempts).unwrap();
        writeln!(s, "emitted\t{}", self.emitted).unwrap();
        writeln!(s, "rejected_invalid\t{}", self.rejected_invalid).unwrap();
        writeln!(s, "truncated\t{}", self.truncated).unwrap();
        writeln!(s, "repaired\t{}", self.repaired).unwrap();
        writeln!(s, "status\t{}", if self.complete() { "complete" } else { "partial" }).unwrap();
        for (k, n) in &self.reasons {
            writeln!(s, "reason\t{k}\t{n}").unwrap();
        }
        s
    }
}

enum Attempt {
    Emitted { graph: LabeledGraph, truncated: bool, repaired: bool },
    Rejected { reason: Violation, truncated: bool },
}

fn attempt(p: &ModelParams, v: &Vocabulary, gc: &GenerationConfig, index: usize) -> Result<Attempt, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(gc.seed);
    rng.set_stream(index as u64);
    let raw = sample_sequence(p, v, gc, &mut rng)?;
    let truncated = raw.truncated;
    if truncated && gc.repair == RepairMode::Strict {
        return Ok(Attempt::Rejected { reason: Violation::Truncated, truncated });
    }
    let repaired = match repair_code(&raw.tuples, gc.repair, Some(v.labels())) {
        Ok(r) => r,
        Err((_, reason)) => return Ok(Attempt::Rejected { reason, truncated }),
    };
    let graph = code_to_graph(&repaired.code, v.labels())
        .map_err(|e| ModelError::Vocabulary(format!("validated code failed to decode: {e}")))?;
    Ok(Attempt::Emitted { graph, truncated, repaired: !repaired.notes.is_empty() || truncated })
}

/// Samples until `count` graphs are emitted or `10 * count` attempts are
/// spent. Attempt `j` uses stream `j` of a generator seeded with `gc.seed`,
/// and graphs are kept in attempt order, so the result does not depend on
/// the thread count. A short result is signalled by an incomplete report.
pub fn generate_graphs(
    p: &ModelParams,
    v: &Vocabulary,
    gc: &GenerationConfig,
) -> Result<(Vec<LabeledGraph>, GenerationReport), ModelError> {
    gc.validate()?;
    p.dims().check_vocabulary(v)?;
    let budget = gc.count * ATTEMPTS_PER_GRAPH;
    let mut report = GenerationReport { requested: gc.count, ..Default::default() };
    let mut graphs = Vec::with_capacity(gc.count);
    let mut next = 0;
    while graphs.len() < gc.count && next < budget {
        let wave = (gc.count - graphs.len()).max(16).min(budget - next);
        let outcomes: Vec<Attempt> =
            (next..next + wave).into_par_iter().map(|j| attempt(p, v, gc, j)).collect::<Result<_, _>>()?;
        next += wave;
        for a in outcomes {
            if graphs.len() == gc.count {
                break;
            }
            report.attempts += 1;
            match a {
                Attempt::Emitted { graph, truncated, repaired } => {
                    report.truncated += truncated as usize;
                    report.repaired += repaired as usize;
                    graphs.push(graph);
                }
                Attempt::Rejected { reason, truncated } => {
                    report.truncated += truncated as usize;
                    report.rejected_invalid += 1;
                    *report.reasons.entry(reason.as_str().to_string()).or_default() += 1;
                }
            }
        }
    }
    report.emitted = graphs.len();
    Ok((graphs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::{min_dfs_code, DfsCode};
    use crate::graph::{is_isomorphic, parse_dataset, LabelOrder};
    use crate::nn::{build_vocabulary, softmax, ModelDims};

    fn vocab() -> Vocabulary {
        let d = parse_dataset("d", "t # 0\nv 0 A\nv 1 B\nv 2 A\ne 0 1 x\ne 1 2 y\n", false).unwrap();
        build_vocabulary(&[&d], LabelOrder::FirstAppearance).unwrap()
    }

    /// Width-one model that emits `tuple` with probability 1 and then EOS.
    fn point_mass(v: &Vocabulary, tuple: EdgeTuple) -> ModelParams {
        let tok = v.tuple_token(&tuple).unwrap();
        let mut p = ModelParams::zeros(ModelDims::new(v, 1, 1, 1, 1)).unwrap();
        p.tensor_mut("embed.weight").unwrap()[v.offsets()[0] + tok[0]] = 1.0;
        p.tensor_mut("lstm0.bias").unwrap().copy_from_slice(&[50.0, -50.0, 0.0, 50.0]);
        p.tensor_mut("lstm0.weight_input").unwrap()[2] = 5.0;
        let names = ["from_time", "to_time", "from_label", "edge_label", "to_label"];
        for (k, name) in names.iter().enumerate() {
            p.tensor_mut(&format!("head.{name}.weight1")).unwrap()[0] = 1.0;
            let eos = v.sizes()[k] - 1;
            let w2 = p.tensor_mut(&format!("head.{name}.weight2")).unwrap();
            w2[tok[k]] = -2000.0;
            w2[eos] = 2000.0;
            let b2 = p.tensor_mut(&format!("head.{name}.bias2")).unwrap();
            b2.fill(-1000.0);
            b2[tok[k]] = 0.0;
        }
        p
    }

    #[test]
    fn point_mass_model_has_zero_loss() {
        let v = vocab();
        let t = EdgeTuple::new(0, 1, 0, 0, 1);
        let p = point_mass(&v, t);
        let code = DfsCode::from_tuples(vec![t]);
        assert_eq!(crate::nn::sequence_loss(&p, &code, &v).unwrap(), 0.0);
    }

    #[test]
    fn eos_model_samples_nothing() {
        let v = vocab();
        let mut p = ModelParams::zeros(ModelDims::new(&v, 2, 2, 1, 2)).unwrap();
        let eos = v.sizes()[0] - 1;
        p.tensor_mut("head.from_time.bias2").unwrap()[eos] = 1e4;
        let gc = GenerationConfig::new(5, 10, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert!(sample_sequence(&p, &v, &gc, &mut rng).unwrap().tuples.is_empty());
        }
        let (graphs, report) = generate_graphs(&p, &v, &gc).unwrap();
        assert!(graphs.is_empty());
        assert_eq!(report.attempts, 100);
        assert_eq!(report.rejected_invalid, 100);
        assert_eq!(report.reasons.get("empty"), Some(&100));
        assert!(!report.complete());
    }

    #[test]
    fn point_mass_model_reproduces_its_graph() {
        let v = vocab();
        let t = EdgeTuple::new(0, 1, 0, 1, 1);
        let p = point_mass(&v, t);
        let gc = GenerationConfig::new(3, 25, 4);
        let (graphs, report) = generate_graphs(&p, &v, &gc).unwrap();
        assert_eq!(graphs.len(), 25);
        assert_eq!(report.rejected_invalid, 0);
        assert_eq!(report.attempts, 25);
        for g in &graphs {
            assert_eq!(min_dfs_code(g).tuples(), &[t]);
        }
    }

    #[test]
    fn step_one_frequencies_match_softmax() {
        let v = vocab();
        let p = ModelParams::init(ModelDims::new(&v, 2, 2, 1, 2), 12).unwrap();
        let sos = TokenVector::sos(&v);
        let state = HiddenState::zeros(&p);
        let (_, heads) = forward_step(&p, &state, &sos, &mut DropoutMode::Eval).unwrap();
        let n = 10_000;
        let mut counts: Vec<Vec<usize>> = v.sizes().iter().map(|&s| vec![0; s]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..n {
            let (_, tok) = sample_step(&p, &state, &sos, 1.0, &mut rng).unwrap();
            for k in 0..5 {
                counts[k][tok[k]] += 1;
            }
        }
        for k in 0..5 {
            let probs = softmax(&heads[k]);
            for (c, &q) in probs.iter().enumerate() {
                let f = counts[k][c] as f64 / n as f64;
                let sigma = (q * (1.0 - q) / n as f64).sqrt();
                assert!((f - q).abs() <= 3.0 * sigma, "component {k} token {c}: {f} vs {q}");
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let v = vocab();
        let p = ModelParams::init(ModelDims::new(&v, 4, 4, 1, 4), 3).unwrap();
        let gc = GenerationConfig { repair: RepairMode::Lenient, ..GenerationConfig::new(4, 30, 8) };
        let (a, ra) = generate_graphs(&p, &v, &gc).unwrap();
        let (b, rb) = generate_graphs(&p, &v, &gc).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.emitted + ra.rejected_invalid, ra.attempts);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (c, _) = one.install(|| generate_graphs(&p, &v, &gc).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn strict_graphs_roundtrip_and_truncation_is_flagged() {
        let v = vocab();
        let p = ModelParams::init(ModelDims::new(&v, 4, 4, 1, 4), 5).unwrap();
        let gc = GenerationConfig::new(2, 40, 1);
        let (graphs, report) = generate_graphs(&p, &v, &gc).unwrap();
        assert_eq!(report.emitted + report.rejected_invalid, report.attempts);
        assert_eq!(report.reasons.get("truncated").copied().unwrap_or(0), report.truncated);
        for g in &graphs {
            let code = min_dfs_code(g);
            assert!(code.len() <= 2);
            let back = code_to_graph(&code, v.labels()).unwrap();
            assert!(is_isomorphic(&back, g).unwrap());
        }
    }

    #[test]
    fn report_format() {
        let mut r = GenerationReport { requested: 2, attempts: 3, emitted: 2, rejected_invalid: 1, ..Default::default() };
        r.reasons.insert("bad-start".into(), 1);
        let text = r.to_tsv();
        assert!(text.contains("status\tcomplete\n"));
        assert!(text.ends_with("reason\tbad-start\t1\n"));
    }

    #[test]
    fn default_cap() {
        assert_eq!(default_max_tuples(10), 15);
        assert_eq!(default_max_tuples(7), 11);
    }
}
