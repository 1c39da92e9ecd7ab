use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use super::kernel::{KernelKind, KernelSpec, Statistic};
use super::MetricError;
use crate::canon::min_code_of;
use crate::graph::LabeledGraph;

/// Canonical id of a rooted neighbourhood: the root's distance-augmented
/// label followed by the flattened minimum DFS code of the neighbourhood.
pub type Descriptor = Arc<[u32]>;

/// `(radius, distance, descriptor of u, descriptor of w)`
pub type FeatureKey = (usize, usize, Descriptor, Descriptor);

/// Sparse, L2-normalized feature vector sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct NspdkFeatures {
    entries: Vec<(FeatureKey, f64)>,
}

impl NspdkFeatures {
    pub fn entries(&self) -> &[(FeatureKey, f64)] {
        &self.entries
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

impl Statistic for NspdkFeatures {
    fn kernel(&self, other: &Self, spec: &KernelSpec) -> Result<f64, MetricError> {
        match spec.kind {
            KernelKind::Linear => Ok(self.dot(other)),
            _ => Err(MetricError::Config("NSPDK features only support the linear kernel".into())),
        }
    }
}

fn bfs(g: &LabeledGraph, root: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &(w, _) in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn descriptor(g: &LabeledGraph, dist: &[usize], radius: usize, max_radius: usize) -> Descriptor {
    let inside: Vec<usize> = (0..g.node_count()).filter(|&v| dist[v] <= radius).collect();
    let mut local = vec![usize::MAX; g.node_count()];
    for (i, &v) in inside.iter().enumerate() {
        local[v] = i;
    }
    // every node carries its distance to the root, so the root is marked
    let aug = |v: usize| g.node_label(v) * (max_radius as u32 + 1) + dist[v] as u32;
    let labels: Vec<u32> = inside.iter().map(|&v| aug(v)).collect();
    let adj: Vec<Vec<(usize, u32)>> = inside
        .iter()
        .map(|&v| g.neighbors(v).iter().filter(|&&(w, _)| local[w] != usize::MAX).map(|&(w, l)| (local[w], l)).collect())
        .collect();
    let root = inside.iter().position(|&v| dist[v] == 0).expect("root lies in its own neighbourhood");
    let mut out = vec![labels[root]];
    for t in min_code_of(&labels, &adj).tuples() {
        out.extend([t.from_time as u32, t.to_time as u32, t.from_label, t.edge_label, t.to_label]);
    }
    out.into()
}

/// Neighbourhood subgraph pairwise distance features of `g`.
///
/// Every ordered node pair `(u, w)` at distance `d <= max_distance`, including
/// `u == w`, emits one feature per radius `r <= max_radius`.
pub fn nspdk_features(g: &LabeledGraph, max_radius: usize, max_distance: usize) -> NspdkFeatures {
    let n = g.node_count();
    let dists: Vec<Vec<usize>> = (0..n).map(|v| bfs(g, v)).collect();
    let desc: Vec<Vec<Descriptor>> =
        (0..n).map(|v| (0..=max_radius).map(|r| descriptor(g, &dists[v], r, max_radius)).collect()).collect();
    let mut counts: BTreeMap<FeatureKey, f64> = BTreeMap::new();
    for u in 0..n {
        for w in 0..n {
            let d = dists[u][w];
            if d > max_distance {
                continue;
            }
            for r in 0..=max_radius {
                *counts.entry((r, d, desc[u][r].clone(), desc[w][r].clone())).or_insert(0.0) += 1.0;
            }
        }
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    NspdkFeatures { entries: counts.into_iter().map(|(k, c)| (k, c / norm)).collect() }
}
