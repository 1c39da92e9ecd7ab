use super::{CanonError, DfsCode, EdgeTuple};
use crate::graph::LabeledGraph;

/// Node limit for exhaustive traversal enumeration.
pub const BRUTE_FORCE_MAX_NODES: usize = 8;

/// Every DFS code of `g`: all start nodes and all orders of visiting
/// unvisited neighbors. Backward edges of a newly discovered node are
/// emitted right after its forward edge, by increasing target timestamp.
pub fn all_dfs_codes(g: &LabeledGraph) -> Result<Vec<DfsCode>, CanonError> {
    let n = g.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(CanonError::TooLarge { nodes: n, limit: BRUTE_FORCE_MAX_NODES });
    }
    let mut out = Vec::new();
    if g.edge_count() == 0 {
        out.push(DfsCode::default());
        return Ok(out);
    }
    for start in 0..n {
        let mut walk = Walk { g, time_of: vec![None; n], count: 0, code: Vec::new() };
        walk.time_of[start] = Some(0);
        walk.count = 1;
        walk.explore(&[start], &mut |code| out.push(DfsCode::from_tuples(code.to_vec())));
    }
    Ok(out)
}

/// Minimum over [`all_dfs_codes`]. Exponential; a test oracle.
pub fn brute_force_min_code(g: &LabeledGraph) -> Result<DfsCode, CanonError> {
    Ok(all_dfs_codes(g)?.into_iter().min().unwrap_or_default())
}

struct Walk<'a> {
    g: &'a LabeledGraph,
    time_of: Vec<Option<usize>>,
    count: usize,
    code: Vec<EdgeTuple>,
}

impl Walk<'_> {
    fn explore(&mut self, stack: &[usize], emit: &mut dyn FnMut(&[EdgeTuple])) {
        let Some(&top) = stack.last() else {
            emit(&self.code);
            return;
        };
        let fresh: Vec<(usize, u32)> =
            self.g.neighbors(top).iter().copied().filter(|&(x, _)| self.time_of[x].is_none()).collect();
        if fresh.is_empty() {
            self.explore(&stack[..stack.len() - 1], emit);
            return;
        }
        let g = self.g;
        for (x, l) in fresh {
            let t_top = self.time_of[top].unwrap();
            let t_x = self.count;
            let code_len = self.code.len();
            self.time_of[x] = Some(t_x);
            self.count += 1;
            self.code.push(EdgeTuple::new(t_top, t_x, g.node_label(top), l, g.node_label(x)));
            let mut back: Vec<(usize, u32, usize)> = g
                .neighbors(x)
                .iter()
                .filter(|&&(w, _)| w != top)
                .filter_map(|&(w, lw)| self.time_of[w].map(|t| (t, lw, w)))
                .collect();
            back.sort_unstable();
            for (t_w, lw, w) in back {
                self.code.push(EdgeTuple::new(t_x, t_w, g.node_label(x), lw, g.node_label(w)));
            }
            let mut next = stack.to_vec();
            next.push(x);
            self.explore(&next, emit);
            self.code.truncate(code_len);
            self.count -= 1;
            self.time_of[x] = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::min_dfs_code;
    use crate::graph::testutil::*;
    use crate::graph::LabeledGraph;

    #[test]
    fn single_edge_matches_fast_path() {
        let s = space(&["A", "B"], &["e"]);
        let g = LabeledGraph::new(s, vec![0, 1], [(0, 1, 0)]).unwrap();
        let codes = all_dfs_codes(&g).unwrap();
        assert_eq!(codes.len(), 2);
        assert_eq!(brute_force_min_code(&g).unwrap(), min_dfs_code(&g));
    }

    #[test]
    fn triangle_structure() {
        let s = space(&["A"], &["e"]);
        let g = LabeledGraph::new(s, vec![0; 3], [(0, 1, 0), (1, 2, 0), (0, 2, 0)]).unwrap();
        let code = brute_force_min_code(&g).unwrap();
        assert_eq!(code.len(), 3);
        let last = code.tuples()[2];
        assert_eq!((last.from_time, last.to_time), (2, 0));
        // every emitted code covers every edge exactly once
        for c in all_dfs_codes(&g).unwrap() {
            assert_eq!(c.len(), 3);
        }
    }

    #[test]
    fn refuses_large_graphs() {
        let s = space(&["A"], &["e"]);
        let edges: Vec<_> = (1..9).map(|v| (v - 1, v, 0)).collect();
        let g = LabeledGraph::new(s, vec![0; 9], edges).unwrap();
        assert!(matches!(brute_force_min_code(&g), Err(CanonError::TooLarge { nodes: 9, .. })));
    }
}
