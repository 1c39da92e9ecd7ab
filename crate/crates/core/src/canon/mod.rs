//! DFS codes and minimum-DFS-code canonization.
//!
//! A DFS code lists every edge of a connected graph as a five-tuple
//! `(from_time, to_time, from_label, edge_label, to_label)` in the order a
//! depth-first traversal meets it. Timestamps are discovery times. Forward
//! edges (`from_time < to_time`) discover a new node; backward edges close a
//! cycle back to a node on the current rightmost path.
//!
//! Codes are ordered lexicographically with [`compare_tuples`], and the
//! smallest code over all traversals is a canonical label: two graphs share a
//! minimum code exactly when they are isomorphic.

mod brute;
mod decode;
mod minimum;

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::graph::GraphError;

pub use brute::{all_dfs_codes, brute_force_min_code, BRUTE_FORCE_MAX_NODES};
pub use decode::{code_to_graph, repair_code, validate_code, RepairAction, RepairMode, RepairNote, Repaired, Violation};
pub use minimum::min_dfs_code;
pub(crate) use minimum::min_code_of;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonError {
    #[error("brute-force canonization is limited to {limit} nodes, graph has {nodes}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("invalid DFS code at tuple {position}: {violation}")]
    InvalidCode { position: usize, violation: Violation },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One edge of a DFS code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeTuple {
    pub from_time: usize,
    pub to_time: usize,
    pub from_label: u32,
    pub edge_label: u32,
    pub to_label: u32,
}

impl EdgeTuple {
    pub const fn new(from_time: usize, to_time: usize, from_label: u32, edge_label: u32, to_label: u32) -> Self {
        Self { from_time, to_time, from_label, edge_label, to_label }
    }

    pub fn is_forward(&self) -> bool {
        self.from_time < self.to_time
    }

    fn labels(&self) -> (u32, u32, u32) {
        (self.from_label, self.edge_label, self.to_label)
    }
}

impl fmt::Display for EdgeTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{},{},{})",
            self.from_time, self.to_time, self.from_label, self.edge_label, self.to_label
        )
    }
}

/// DFS lexicographic order on tuples that extend a common code prefix.
///
/// Structure decides first:
/// * forward vs forward: smaller `to_time`, then larger `from_time`;
/// * backward vs backward: smaller `from_time`, then smaller `to_time`;
/// * backward `(i, j)` precedes forward `(x, y)` iff `i < y`;
/// * forward `(i, j)` precedes backward `(x, y)` iff `j <= x`.
///
/// Structurally equal tuples compare by `(from_label, edge_label, to_label)`.
pub fn compare_tuples(a: &EdgeTuple, b: &EdgeTuple) -> Ordering {
    let structural = match (a.is_forward(), b.is_forward()) {
        (true, true) => a.to_time.cmp(&b.to_time).then(b.from_time.cmp(&a.from_time)),
        (false, false) => a.from_time.cmp(&b.from_time).then(a.to_time.cmp(&b.to_time)),
        (false, true) => {
            if a.from_time < b.to_time {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        (true, false) => {
            if a.to_time <= b.from_time {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
    };
    structural.then_with(|| a.labels().cmp(&b.labels()))
}

/// An ordered sequence of edge tuples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DfsCode(Vec<EdgeTuple>);

impl DfsCode {
    /// Wraps tuples without checking them; see [`validate_code`].
    pub fn from_tuples(tuples: Vec<EdgeTuple>) -> Self {
        Self(tuples)
    }

    pub fn tuples(&self) -> &[EdgeTuple] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of distinct timestamps (nodes) the code introduces.
    pub fn node_count(&self) -> usize {
        self.0.iter().map(|t| t.from_time.max(t.to_time) + 1).max().unwrap_or(0)
    }

    pub fn into_tuples(self) -> Vec<EdgeTuple> {
        self.0
    }

    /// Parses the `(t_u,t_v,l_u,l_uv,l_v)` dump format written by `Display`.
    pub fn parse(line: &str) -> Option<Self> {
        line.split_whitespace()
            .map(|tok| {
                let inner = tok.strip_prefix('(')?.strip_suffix(')')?;
                let v: Vec<&str> = inner.split(',').collect();
                if v.len() != 5 {
                    return None;
                }
                Some(EdgeTuple::new(
                    v[0].parse().ok()?,
                    v[1].parse().ok()?,
                    v[2].parse().ok()?,
                    v[3].parse().ok()?,
                    v[4].parse().ok()?,
                ))
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }
}

impl Ord for DfsCode {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match compare_tuples(a, b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for DfsCode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DfsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: u32 = 0;
    const Y: u32 = 1;
    const A: u32 = 0;

    #[test]
    fn label_tiebreak_on_first_tuple() {
        let a = EdgeTuple::new(0, 1, X, A, Y);
        let b = EdgeTuple::new(0, 1, Y, A, X);
        assert_eq!(compare_tuples(&a, &b), Ordering::Less);
        assert_eq!(compare_tuples(&a, &a), Ordering::Equal);
    }

    #[test]
    fn structural_rules() {
        let f = |i, j| EdgeTuple::new(i, j, 0, 0, 0);
        // forward: smaller target first, then deeper source
        assert_eq!(compare_tuples(&f(2, 3), &f(1, 4)), Ordering::Less);
        assert_eq!(compare_tuples(&f(2, 3), &f(1, 3)), Ordering::Less);
        // backward: smaller source, then smaller target
        assert_eq!(compare_tuples(&f(2, 0), &f(3, 0)), Ordering::Less);
        assert_eq!(compare_tuples(&f(3, 0), &f(3, 1)), Ordering::Less);
        // backward from the rightmost node precedes any forward extension
        assert_eq!(compare_tuples(&f(3, 0), &f(3, 4)), Ordering::Less);
        assert_eq!(compare_tuples(&f(3, 4), &f(3, 0)), Ordering::Greater);
        assert_eq!(compare_tuples(&f(1, 2), &f(2, 0)), Ordering::Less);
    }

    #[test]
    fn dump_format_roundtrip() {
        let code = DfsCode::from_tuples(vec![EdgeTuple::new(0, 1, 2, 0, 3), EdgeTuple::new(1, 0, 3, 1, 2)]);
        let text = code.to_string();
        assert_eq!(text, "(0,1,2,0,3) (1,0,3,1,2)");
        assert_eq!(DfsCode::parse(&text), Some(code));
        assert_eq!(DfsCode::parse("(0,1,2)"), None);
    }

    #[test]
    fn prefix_is_smaller() {
        let a = DfsCode::from_tuples(vec![EdgeTuple::new(0, 1, 0, 0, 0)]);
        let b = DfsCode::from_tuples(vec![EdgeTuple::new(0, 1, 0, 0, 0), EdgeTuple::new(1, 2, 0, 0, 0)]);
        assert!(a < b);
    }
}
