use std::collections::HashSet;

use super::{compare_tuples, DfsCode, EdgeTuple};
use crate::graph::LabeledGraph;
use std::cmp::Ordering;

const UNSEEN: usize = usize::MAX;

/// A partial traversal that realises the best code prefix found so far.
#[derive(Clone)]
struct Embedding {
    /// node id for each timestamp
    nodes: Vec<usize>,
    /// timestamp of each node, `UNSEEN` if not yet discovered
    time_of: Vec<usize>,
    /// row-major `n x n` flags for edges already in the code
    used: Vec<bool>,
    /// timestamps on the rightmost path, root first
    path: Vec<usize>,
}

impl Embedding {
    fn start(n: usize, u: usize, v: usize) -> Self {
        let mut time_of = vec![UNSEEN; n];
        time_of[u] = 0;
        time_of[v] = 1;
        let mut used = vec![false; n * n];
        used[u * n + v] = true;
        used[v * n + u] = true;
        Self { nodes: vec![u, v], time_of, used, path: vec![0, 1] }
    }

    fn apply(&self, n: usize, ext: &Extension) -> Self {
        let mut next = self.clone();
        let a = self.nodes[ext.tuple.from_time];
        let b = ext.node;
        next.used[a * n + b] = true;
        next.used[b * n + a] = true;
        if ext.tuple.is_forward() {
            next.time_of[b] = ext.tuple.to_time;
            next.nodes.push(b);
            let keep = self.path.iter().position(|&t| t == ext.tuple.from_time).unwrap() + 1;
            next.path.truncate(keep);
            next.path.push(ext.tuple.to_time);
        }
        next
    }
}

struct Extension {
    tuple: EdgeTuple,
    /// the node reached by the new edge
    node: usize,
}

/// Candidate rightmost-path extensions of one embedding.
fn extensions(labels: &[u32], adj: &[Vec<(usize, u32)>], emb: &Embedding, out: &mut Vec<Extension>) {
    let n = labels.len();
    let rm_time = *emb.path.last().unwrap();
    let rm = emb.nodes[rm_time];
    // backward edges from the rightmost node to the rightmost path
    for &t in &emb.path[..emb.path.len() - 1] {
        let w = emb.nodes[t];
        if emb.used[rm * n + w] {
            continue;
        }
        if let Some(&(_, l)) = adj[rm].iter().find(|&&(x, _)| x == w) {
            out.push(Extension { tuple: EdgeTuple::new(rm_time, t, labels[rm], l, labels[w]), node: w });
        }
    }
    // forward edges from any rightmost-path node to an undiscovered node
    let next_time = emb.nodes.len();
    for &t in &emb.path {
        let p = emb.nodes[t];
        for &(x, l) in &adj[p] {
            if emb.time_of[x] == UNSEEN {
                out.push(Extension { tuple: EdgeTuple::new(t, next_time, labels[p], l, labels[x]), node: x });
            }
        }
    }
}

/// Minimum DFS code of a connected graph given as labels plus adjacency.
///
/// The code is grown one tuple at a time. Every traversal whose code equals
/// the best prefix so far is kept; each round all of their rightmost-path
/// extensions are compared and only the smallest survives. Traversals that
/// reach the same timestamp assignment are merged.
pub(crate) fn min_code_of(labels: &[u32], adj: &[Vec<(usize, u32)>]) -> DfsCode {
    let n = labels.len();
    let m: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    if m == 0 {
        return DfsCode::default();
    }

    let mut best: Option<EdgeTuple> = None;
    for u in 0..n {
        for &(v, l) in &adj[u] {
            let t = EdgeTuple::new(0, 1, labels[u], l, labels[v]);
            if best.as_ref().is_none_or(|b| compare_tuples(&t, b) == Ordering::Less) {
                best = Some(t);
            }
        }
    }
    let first = best.unwrap();
    let mut embeddings: Vec<Embedding> = Vec::new();
    for u in 0..n {
        for &(v, l) in &adj[u] {
            if EdgeTuple::new(0, 1, labels[u], l, labels[v]) == first {
                embeddings.push(Embedding::start(n, u, v));
            }
        }
    }
    let mut code = vec![first];

    let mut candidates = Vec::new();
    while code.len() < m {
        let mut min: Option<EdgeTuple> = None;
        let mut per_embedding: Vec<Vec<Extension>> = Vec::with_capacity(embeddings.len());
        for emb in &embeddings {
            candidates.clear();
            extensions(labels, adj, emb, &mut candidates);
            for c in &candidates {
                if min.as_ref().is_none_or(|b| compare_tuples(&c.tuple, b) == Ordering::Less) {
                    min = Some(c.tuple);
                }
            }
            per_embedding.push(std::mem::take(&mut candidates));
        }
        let min = min.expect("connected graph always has an extension until all edges are coded");
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut next = Vec::new();
        for (emb, exts) in embeddings.iter().zip(&per_embedding) {
            for ext in exts.iter().filter(|e| e.tuple == min) {
                let grown = emb.apply(n, ext);
                // The shared code prefix plus the timestamp map fix the used
                // edges and the rightmost path, so the map identifies the state.
                if seen.insert(grown.nodes.clone()) {
                    next.push(grown);
                }
            }
        }
        embeddings = next;
        code.push(min);
    }
    DfsCode::from_tuples(code)
}

/// The lexicographically smallest DFS code of `g`; its length is `|E|`.
pub fn min_dfs_code(g: &LabeledGraph) -> DfsCode {
    min_code_of(g.node_labels(), g.adjacency())
}
