use std::sync::Arc;

use super::{GraphError, LabeledGraph};
use crate::canon::min_dfs_code;

fn same_space(a: &LabeledGraph, b: &LabeledGraph) -> Result<(), GraphError> {
    if Arc::ptr_eq(a.space(), b.space()) || a.space() == b.space() {
        Ok(())
    } else {
        Err(GraphError::VocabularyMismatch)
    }
}

/// Labeled isomorphism, decided by comparing minimum DFS codes.
pub fn is_isomorphic(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<bool, GraphError> {
    same_space(g1, g2)?;
    if g1.node_count() != g2.node_count() || g1.edge_count() != g2.edge_count() {
        return Ok(false);
    }
    let mut l1 = g1.node_labels().to_vec();
    let mut l2 = g2.node_labels().to_vec();
    l1.sort_unstable();
    l2.sort_unstable();
    if l1 != l2 {
        return Ok(false);
    }
    // Single-node graphs have empty codes; the label check above settles them.
    Ok(min_dfs_code(g1) == min_dfs_code(g2))
}

/// True when `small` embeds into `big` through an injective, label-preserving
/// node map that sends every edge of `small` onto an equally labeled edge of
/// `big`. Extra edges in `big` are allowed.
pub fn is_subgraph(small: &LabeledGraph, big: &LabeledGraph) -> Result<bool, GraphError> {
    same_space(small, big)?;
    if small.node_count() > big.node_count() || small.edge_count() > big.edge_count() {
        return Ok(false);
    }
    if !label_counts_fit(small, big) {
        return Ok(false);
    }
    let order = match_order(small);
    let mut mapping = vec![usize::MAX; small.node_count()];
    let mut used = vec![false; big.node_count()];
    Ok(extend(small, big, &order, 0, &mut mapping, &mut used))
}

fn label_counts_fit(small: &LabeledGraph, big: &LabeledGraph) -> bool {
    let bins = small.space().node.len();
    let mut need = vec![0i64; bins];
    for &l in small.node_labels() {
        need[l as usize] += 1;
    }
    for &l in big.node_labels() {
        need[l as usize] -= 1;
    }
    need.iter().all(|&c| c <= 0)
}

/// Visit order for `small`: start at the highest-degree node, then always
/// pick the node with the most already-ordered neighbors.
fn match_order(small: &LabeledGraph) -> Vec<usize> {
    let n = small.node_count();
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    let first = (0..n).max_by_key(|&v| (small.degree(v), std::cmp::Reverse(v))).unwrap();
    let mut next = Some(first);
    while let Some(v) = next {
        placed[v] = true;
        order.push(v);
        for &(w, _) in small.neighbors(v) {
            links[w] += 1;
        }
        next = (0..n)
            .filter(|&w| !placed[w] && links[w] > 0)
            .max_by_key(|&w| (links[w], small.degree(w), std::cmp::Reverse(w)));
    }
    order
}

fn extend(
    small: &LabeledGraph,
    big: &LabeledGraph,
    order: &[usize],
    depth: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    let anchor = small.neighbors(v).iter().find(|&&(w, _)| mapping[w] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(&(w, _)) => big.neighbors(mapping[w]).iter().map(|&(x, _)| x).collect(),
        None => (0..big.node_count()).collect(),
    };
    for c in candidates {
        if used[c] || big.node_label(c) != small.node_label(v) || big.degree(c) < small.degree(v) {
            continue;
        }
        let fits = small.neighbors(v).iter().all(|&(w, label)| {
            mapping[w] == usize::MAX || big.edge_label(mapping[w], c) == Some(label)
        });
        if !fits {
            continue;
        }
        mapping[v] = c;
        used[c] = true;
        if extend(small, big, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[v] = usize::MAX;
        used[c] = false;
    }
    false
}
