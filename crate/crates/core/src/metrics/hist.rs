use std::collections::BTreeMap;

use crate::graph::LabeledGraph;

/// Key of a histogram category. Keys with a position lie on an ordered line
/// and admit a transport distance.
pub trait Category: Ord + Clone + Send + Sync {
    fn position(&self) -> Option<usize> {
        None
    }
}

impl Category for usize {
    fn position(&self) -> Option<usize> {
        Some(*self)
    }
}

impl Category for String {}

impl Category for (String, usize) {}

/// Counts over categories, kept in key order.
///
/// `bin_width` is the distance between neighbouring positions and only
/// matters for ordered keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<K: Category> {
    bins: BTreeMap<K, f64>,
    bin_width: f64,
    normalized: bool,
}

impl<K: Category> Histogram<K> {
    pub fn new(bin_width: f64) -> Self {
        Self { bins: BTreeMap::new(), bin_width, normalized: false }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (K, f64)>, bin_width: f64) -> Self {
        let mut h = Self::new(bin_width);
        for (k, c) in counts {
            h.add(k, c);
        }
        h
    }

    pub fn add(&mut self, key: K, count: f64) {
        *self.bins.entry(key).or_insert(0.0) += count;
        self.normalized = false;
    }

    /// Scales counts to sum to one. An empty histogram stays empty and is
    /// still flagged as normalized.
    pub fn normalize(mut self) -> Self {
        let total: f64 = self.bins.values().sum();
        if total > 0.0 {
            for c in self.bins.values_mut() {
                *c /= total;
            }
        }
        self.normalized = true;
        self
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn get(&self, key: &K) -> f64 {
        self.bins.get(key).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.bins.iter().map(|(k, &c)| (k, c))
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.bins.values().sum()
    }
}

/// Normalized node degree distribution.
pub fn degree_hist(g: &LabeledGraph) -> Histogram<usize> {
    Histogram::from_counts((0..g.node_count()).map(|v| (g.degree(v), 1.0)), 1.0).normalize()
}

/// Local clustering coefficient of every node.
pub fn clustering_coefficients(g: &LabeledGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut adj = vec![false; n * n];
    for e in g.edges() {
        adj[e.u * n + e.v] = true;
        adj[e.v * n + e.u] = true;
    }
    (0..n)
        .map(|v| {
            let nb = g.neighbors(v);
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &(a, _)) in nb.iter().enumerate() {
                for &(b, _) in &nb[i + 1..] {
                    links += adj[a * n + b] as usize;
                }
            }
            links as f64 / (d * (d - 1) / 2) as f64
        })
        .collect()
}

/// Clustering coefficients binned into `bins` equal-width bins on `[0, 1]`.
/// Bin keys are indices; the bin width is `1/bins`, so transport distances
/// come out in coefficient units.
pub fn clustering_hist(g: &LabeledGraph, bins: usize) -> Histogram<usize> {
    let bins = bins.max(1);
    let key = |c: f64| ((c * bins as f64) as usize).min(bins - 1);
    Histogram::from_counts(clustering_coefficients(g).into_iter().map(|c| (key(c), 1.0)), 1.0 / bins as f64)
        .normalize()
}

pub fn node_label_hist(g: &LabeledGraph) -> Histogram<String> {
    Histogram::from_counts((0..g.node_count()).map(|v| (g.node_symbol(v).to_string(), 1.0)), 1.0).normalize()
}

pub fn edge_label_hist(g: &LabeledGraph) -> Histogram<String> {
    Histogram::from_counts(g.edges().iter().map(|e| (g.edge_symbol(e.label).to_string(), 1.0)), 1.0).normalize()
}

/// Distribution of (node label, degree) pairs.
pub fn joint_label_degree_hist(g: &LabeledGraph) -> Histogram<(String, usize)> {
    Histogram::from_counts((0..g.node_count()).map(|v| ((g.node_symbol(v).to_string(), g.degree(v)), 1.0)), 1.0)
        .normalize()
}
