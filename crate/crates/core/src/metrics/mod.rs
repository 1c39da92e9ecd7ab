//! Sample quality metrics: MMD over graph statistics, NSPDK, average sizes,
//! novelty and uniqueness.
//!
//! Every set of graphs is first re-expressed over one shared label space so
//! that labels compare by symbol.

mod hist;
mod kernel;
mod nspdk;
mod orbit;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{is_subgraph, GraphDataset, GraphError, LabelOrder, LabelSpace, LabeledGraph};

pub use hist::{
    clustering_coefficients, clustering_hist, degree_hist, edge_label_hist, joint_label_degree_hist, node_label_hist,
    Category, Histogram,
};
pub use kernel::{
    gaussian_emd_kernel, gaussian_tv_kernel, mmd, total_variation, wasserstein1, KernelKind, KernelSpec, Statistic,
};
pub use nspdk::{nspdk_features, Descriptor, FeatureKey, NspdkFeatures};
pub use orbit::{mean_orbit_counts, orbit_counts, ORBITS, ORBIT_NAMES};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric needs a nonempty set of graphs")]
    EmptySet,
    #[error("histogram is not normalized")]
    Unnormalized,
    #[error("transport distance needs ordered categories")]
    Unordered,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid metric setting: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sigma: f64,
    pub clustering_bins: usize,
    pub nspdk_radius: usize,
    pub nspdk_distance: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { sigma: 1.0, clustering_bins: 100, nspdk_radius: 2, nspdk_distance: 3 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        KernelSpec::gaussian_tv(self.sigma).validate()?;
        if self.clustering_bins == 0 {
            return Err(MetricError::Config("clustering_bins must be at least 1".into()));
        }
        Ok(())
    }
}

/// Graphs of several datasets over their union label space.
pub fn common_space(sets: &[&GraphDataset]) -> Result<(Arc<LabelSpace>, Vec<Vec<LabeledGraph>>), MetricError> {
    let space = Arc::new(LabelSpace::union(sets.iter().map(|d| &**d.space()), LabelOrder::Symbol));
    let graphs = sets.iter().map(|d| d.graphs_in(&space)).collect::<Result<Vec<_>, _>>()?;
    Ok((space, graphs))
}

fn nonempty(gs: &[LabeledGraph]) -> Result<(), MetricError> {
    if gs.is_empty() {
        Err(MetricError::EmptySet)
    } else {
        Ok(())
    }
}

fn stat_mmd<T: Statistic + Send>(
    a: &[LabeledGraph],
    b: &[LabeledGraph],
    f: impl Fn(&LabeledGraph) -> T + Sync,
    spec: &KernelSpec,
) -> Result<f64, MetricError> {
    let sa: Vec<T> = a.par_iter().map(&f).collect();
    let sb: Vec<T> = b.par_iter().map(&f).collect();
    mmd(&sa, &sb, spec)
}

pub fn nspdk_mmd(gen: &[LabeledGraph], reference: &[LabeledGraph], radius: usize, distance: usize) -> Result<f64, MetricError> {
    nonempty(gen)?;
    nonempty(reference)?;
    stat_mmd(gen, reference, |g| nspdk_features(g, radius, distance), &KernelSpec::linear())
}

/// Node-label, edge-label and joint (label, degree) MMD. The edge-label
/// value is `None` when neither side carries edge labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelMetrics {
    pub node_label: f64,
    pub edge_label: Option<f64>,
    pub joint_label_degree: f64,
}

pub fn label_metrics(gen: &[LabeledGraph], reference: &[LabeledGraph], sigma: f64) -> Result<LabelMetrics, MetricError> {
    nonempty(gen)?;
    nonempty(reference)?;
    let spec = KernelSpec::gaussian_tv(sigma);
    let unlabeled = gen.iter().chain(reference).all(|g| g.space().edges_unlabeled());
    Ok(LabelMetrics {
        node_label: stat_mmd(gen, reference, node_label_hist, &spec)?,
        edge_label: if unlabeled { None } else { Some(stat_mmd(gen, reference, edge_label_hist, &spec)?) },
        joint_label_degree: stat_mmd(gen, reference, joint_label_degree_hist, &spec)?,
    })
}

/// Percentage of `gen` that embeds into no graph of `train`.
pub fn novelty(gen: &[LabeledGraph], train: &[LabeledGraph]) -> Result<f64, MetricError> {
    nonempty(gen)?;
    let seen: Vec<bool> = gen
        .par_iter()
        .map(|g| {
            for t in train {
                if is_subgraph(g, t)? {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<_, GraphError>>()?;
    Ok(100.0 * seen.iter().filter(|&&s| !s).count() as f64 / gen.len() as f64)
}

/// Uniqueness under two readings of the removal rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniqueness {
    /// A graph is removed when it embeds into any other generated graph.
    pub literal: f64,
    /// As above, except the first of several isomorphic copies survives.
    pub keep_one: f64,
}

pub fn uniqueness(gen: &[LabeledGraph]) -> Result<Uniqueness, MetricError> {
    nonempty(gen)?;
    let n = gen.len();
    let rows: Vec<(bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = &gen[i];
            let (mut literal, mut keep) = (true, true);
            for (j, h) in gen.iter().enumerate() {
                if j == i || !is_subgraph(g, h)? {
                    continue;
                }
                literal = false;
                // an embedding between equal sizes is an isomorphism
                let copy = g.node_count() == h.node_count() && g.edge_count() == h.edge_count();
                if !(copy && j > i) {
                    keep = false;
                    break;
                }
            }
            Ok((literal, keep))
        })
        .collect::<Result<_, GraphError>>()?;
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    Ok(Uniqueness {
        literal: pct(rows.iter().filter(|r| r.0).count()),
        keep_one: pct(rows.iter().filter(|r| r.1).count()),
    })
}

fn avg(gs: &[LabeledGraph], f: fn(&LabeledGraph) -> usize) -> f64 {
    gs.iter().map(f).sum::<usize>() as f64 / gs.len() as f64
}

/// Every metric for one generated set against its test and training sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub degree_mmd: f64,
    pub clustering_mmd: f64,
    pub orbit_mmd: f64,
    pub nspdk_mmd: f64,
    pub node_label_mmd: f64,
    pub edge_label_mmd: Option<f64>,
    pub joint_label_degree_mmd: f64,
    pub avg_nodes_gen: f64,
    pub avg_nodes_ref: f64,
    pub avg_edges_gen: f64,
    pub avg_edges_ref: f64,
    pub novelty_pct: f64,
    pub uniqueness_pct: f64,
    pub uniqueness_keep_one_pct: f64,
}

impl MetricReport {
    /// Field names and values in a fixed order; `None` is not applicable.
    pub fn fields(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("degree_mmd", Some(self.degree_mmd)),
            ("clustering_mmd", Some(self.clustering_mmd)),
            ("orbit_mmd", Some(self.orbit_mmd)),
            ("nspdk_mmd", Some(self.nspdk_mmd)),
            ("node_label_mmd", Some(self.node_label_mmd)),
            ("edge_label_mmd", self.edge_label_mmd),
            ("joint_label_degree_mmd", Some(self.joint_label_degree_mmd)),
            ("avg_nodes_gen", Some(self.avg_nodes_gen)),
            ("avg_nodes_ref", Some(self.avg_nodes_ref)),
            ("avg_edges_gen", Some(self.avg_edges_gen)),
            ("avg_edges_ref", Some(self.avg_edges_ref)),
            ("novelty_pct", Some(self.novelty_pct)),
            ("uniqueness_pct", Some(self.uniqueness_pct)),
            ("uniqueness_keep_one_pct", Some(self.uniqueness_keep_one_pct)),
        ]
    }

    /// One `key<TAB>value` line per field.
    pub fn to_text(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(k, v)| match v {
                Some(x) => format!("{k}\t{x:.6}\n"),
                None => format!("{k}\tN/A\n"),
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map = self
            .fields()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.map_or_else(|| "N/A".into(), serde_json::Value::from)))
            .collect();
        serde_json::Value::Object(map)
    }
}

pub fn evaluate(
    gen: &GraphDataset,
    test: &GraphDataset,
    train: &GraphDataset,
    cfg: &EvalConfig,
) -> Result<MetricReport, MetricError> {
    cfg.validate()?;
    let (_, sets) = common_space(&[gen, test, train])?;
    let (g, t, tr) = (&sets[0], &sets[1], &sets[2]);
    let emd = KernelSpec::gaussian_emd(cfg.sigma);
    let tv = KernelSpec::gaussian_tv(cfg.sigma);
    let labels = label_metrics(g, t, cfg.sigma)?;
    let unique = uniqueness(g)?;
    let report = MetricReport {
        degree_mmd: stat_mmd(g, t, degree_hist, &emd)?,
        clustering_mmd: stat_mmd(g, t, |x| clustering_hist(x, cfg.clustering_bins), &emd)?,
        orbit_mmd: stat_mmd(g, t, mean_orbit_counts, &tv)?,
        nspdk_mmd: nspdk_mmd(g, t, cfg.nspdk_radius, cfg.nspdk_distance)?,
        node_label_mmd: labels.node_label,
        edge_label_mmd: labels.edge_label,
        joint_label_degree_mmd: labels.joint_label_degree,
        avg_nodes_gen: avg(g, LabeledGraph::node_count),
        avg_nodes_ref: avg(t, LabeledGraph::node_count),
        avg_edges_gen: avg(g, LabeledGraph::edge_count),
        avg_edges_ref: avg(t, LabeledGraph::edge_count),
        novelty_pct: novelty(g, tr)?,
        uniqueness_pct: unique.literal,
        uniqueness_keep_one_pct: unique.keep_one,
    };
    debug_assert!(report.fields().iter().all(|(_, v)| v.is_none_or(f64::is_finite)));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::{random_graph, random_perm, space};
    use crate::graph::{synth_spring, SpringConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(s: &Arc<LabelSpace>, n: usize) -> LabeledGraph {
        LabeledGraph::new(s.clone(), vec![0; n], (1..n).map(|v| (v - 1, v, 0))).unwrap()
    }

    fn star(s: &Arc<LabelSpace>, leaves: usize) -> LabeledGraph {
        LabeledGraph::new(s.clone(), vec![0; leaves + 1], (1..=leaves).map(|v| (0, v, 0))).unwrap()
    }

    #[test]
    fn uniqueness_worked_example() {
        // ten trees with 21 nodes each that differ in the tail between two
        // hubs, so none embeds in another, plus 90 short paths that embed
        let s = space(&["A"], &["_"]);
        let mut gen: Vec<LabeledGraph>;
        gen = (0..10)
            .map(|i| {
                let mut edges: Vec<(usize, usize, u32)> = (1..=5).map(|v| (0, v, 0)).collect();
                let mut last = 1;
                let mut next = 6;
                for _ in 0..=i {
                    edges.push((last, next, 0));
                    last = next;
                    next += 1;
                }
                let hub = last;
                for _ in 0..(5 + 9 - i) {
                    edges.push((hub, next, 0));
                    next += 1;
                }
                LabeledGraph::new(s.clone(), vec![0; next], edges).unwrap()
            })
            .collect();
        for i in 0..90 {
            gen.push(path(&s, 2 + i % 3));
        }
        let u = uniqueness(&gen).unwrap();
        assert!((u.literal - 10.0).abs() < 1e-12, "{u:?}");
        assert!((u.keep_one - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identical_copies() {
        let s = space(&["A"], &["_"]);
        let gen = vec![path(&s, 3); 4];
        let u = uniqueness(&gen).unwrap();
        assert_eq!(u.literal, 0.0);
        assert_eq!(u.keep_one, 25.0);
        let distinct = vec![path(&s, 3), star(&s, 3).permute(&[3, 2, 1, 0]).unwrap()];
        // the 3-path embeds in the star, so only the star survives
        assert_eq!(uniqueness(&distinct).unwrap().literal, 50.0);
        let incomparable = vec![star(&s, 3), path(&s, 4)];
        assert_eq!(uniqueness(&incomparable).unwrap().literal, 100.0);
    }

    #[test]
    fn uniqueness_matches_definition_and_relabeling() {
        let s = space(&["A", "B"], &["x"]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut gen: Vec<LabeledGraph> = (0..12).map(|i| random_graph(&mut rng, &s, 2 + i % 4, 0.3)).collect();
        gen.push(gen[0].clone());
        let mut literal = 0;
        for i in 0..gen.len() {
            if (0..gen.len()).all(|j| j == i || !is_subgraph(&gen[i], &gen[j]).unwrap()) {
                literal += 1;
            }
        }
        let u = uniqueness(&gen).unwrap();
        assert!((u.literal - 100.0 * literal as f64 / gen.len() as f64).abs() < 1e-12);
        let permuted: Vec<LabeledGraph> =
            gen.iter().map(|g| g.permute(&random_perm(&mut rng, g.node_count())).unwrap()).collect();
        assert_eq!(uniqueness(&permuted).unwrap(), u);
        let train: Vec<LabeledGraph> = gen[..6].to_vec();
        assert_eq!(novelty(&permuted, &train).unwrap(), novelty(&gen, &train).unwrap());
    }

    #[test]
    fn novelty_examples() {
        let s = space(&["A", "Z"], &["_"]);
        let train = vec![path(&s, 4), star(&s, 3)];
        assert_eq!(novelty(&train, &train).unwrap(), 0.0);
        let odd = LabeledGraph::new(s.clone(), vec![1, 0], [(0, 1, 0)]).unwrap();
        assert_eq!(novelty(&[odd.clone()], &train).unwrap(), 100.0);
        let gen = vec![path(&s, 3), star(&s, 4), odd, path(&s, 4)];
        assert_eq!(novelty(&gen, &train).unwrap(), 50.0);
        assert!(matches!(novelty(&[], &train), Err(MetricError::EmptySet)));
    }

    #[test]
    fn label_metrics_by_hand() {
        let s = space(&["A", "B"], &["_"]);
        let a = LabeledGraph::new(s.clone(), vec![0, 1], [(0, 1, 0)]).unwrap();
        let b = LabeledGraph::new(s.clone(), vec![0, 0], [(0, 1, 0)]).unwrap();
        let c = LabeledGraph::new(s.clone(), vec![0, 1, 0], [(0, 1, 0), (1, 2, 0)]).unwrap();
        let m = label_metrics(&[a.clone(), b.clone()], &[a.clone(), b.clone()], 1.0).unwrap();
        assert_eq!((m.node_label, m.edge_label, m.joint_label_degree), (0.0, None, 0.0));
        // joint histograms: a {(A,1):.5,(B,1):.5}, b {(A,1):1}, c {(A,1):2/3,(B,2):1/3}
        // TV(a,b) = .5, TV(a,c) = 1/2 (1/6 + 1/2 + 1/3) = 1/2, TV(b,c) = 1/3
        let k = |tv: f64| (-tv * tv / 2.0f64).exp();
        let xx = (2.0 + 2.0 * k(0.5)) / 4.0;
        let yy = 1.0;
        let xy = (k(0.5) + k(1.0 / 3.0)) / 2.0;
        let m = label_metrics(&[a, b], &[c], 1.0).unwrap();
        assert!((m.joint_label_degree - (xx + yy - 2.0 * xy)).abs() < 1e-12);
    }

    #[test]
    fn edge_labels_reported_when_present() {
        let s = space(&["A"], &["s", "d"]);
        let a = LabeledGraph::new(s.clone(), vec![0, 0], [(0, 1, 0)]).unwrap();
        let b = LabeledGraph::new(s, vec![0, 0], [(0, 1, 1)]).unwrap();
        let m = label_metrics(&[a], &[b], 1.0).unwrap();
        assert!((m.edge_label.unwrap() - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn evaluate_identical_sets() {
        let cfg = SpringConfig::new(5, 20, 9);
        let d = synth_spring(&cfg).unwrap();
        let r = evaluate(&d, &d, &d, &EvalConfig::default()).unwrap();
        for (k, v) in r.fields() {
            if k.ends_with("_mmd") {
                assert!(v.is_none_or(|x| x.abs() < 1e-9), "{k} = {v:?}");
            }
        }
        assert_eq!(r.novelty_pct, 0.0);
        assert_eq!(r.edge_label_mmd, None);
        assert!(r.to_text().contains("edge_label_mmd\tN/A"));
        let json = r.to_json();
        assert_eq!(json["edge_label_mmd"], "N/A");
        assert_eq!(json.as_object().unwrap().len(), 14);
    }

    #[test]
    fn evaluate_spring_against_other_spring() {
        let d1 = synth_spring(&SpringConfig::new(5, 15, 1)).unwrap();
        let d2 = synth_spring(&SpringConfig::new(5, 15, 2)).unwrap();
        let r = evaluate(&d1, &d2, &d2, &EvalConfig::default()).unwrap();
        for (k, v) in r.fields() {
            if let Some(x) = v {
                assert!(x.is_finite() && x >= 0.0, "{k}");
            }
        }
        assert!((0.0..=100.0).contains(&r.novelty_pct));
        assert_eq!(r, evaluate(&d1, &d2, &d2, &EvalConfig::default()).unwrap());
    }
}
