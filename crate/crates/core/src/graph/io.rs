//! Transaction text format.
//!
//! ```text
//! t # <graph-id>
//! v <node-id> <node-label>
//! e <u> <v> <edge-label>
//! ```
//!
//! Node ids restart at 0 in every graph and must be contiguous. Blank lines
//! and lines starting with `#` are ignored, as is a trailing `# ...` after the
//! fields of a `v`/`e` record. A `t # -1` record ends the input.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{GraphDataset, GraphError, LabelSet, LabelSpace, LabeledGraph, UNLABELED_EDGE};

struct RawGraph {
    id: String,
    line: usize,
    nodes: Vec<u32>,
    edges: Vec<(usize, usize, u32)>,
}

fn syntax(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Syntax { line, message: message.into() }
}

fn fields(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for tok in line.split_whitespace() {
        if tok.starts_with('#') && !out.is_empty() && out[0] != "t" {
            break;
        }
        out.push(tok);
    }
    out
}

fn parse_index(tok: &str, line: usize, what: &str) -> Result<usize, GraphError> {
    tok.parse().map_err(|_| syntax(line, format!("invalid {what} {tok:?}")))
}

/// Parses a dataset in transaction format.
///
/// With `unlabeled_edges`, edge-label tokens are optional and every edge gets
/// the [`UNLABELED_EDGE`] sentinel.
pub fn parse_dataset(
    name: &str,
    text: &str,
    unlabeled_edges: bool,
) -> Result<GraphDataset, GraphError> {
    let mut node_labels = LabelSet::new();
    let mut edge_labels = LabelSet::new();
    let mut raw: Vec<RawGraph> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = fields(trimmed);
        match f[0] {
            "t" => {
                if f.len() != 3 || f[1] != "#" {
                    return Err(syntax(lineno, "expected `t # <graph-id>`"));
                }
                if f[2] == "-1" {
                    break;
                }
                raw.push(RawGraph { id: f[2].to_owned(), line: lineno, nodes: vec![], edges: vec![] });
            }
            "v" => {
                let g = raw.last_mut().ok_or_else(|| syntax(lineno, "node before any `t` record"))?;
                if f.len() != 3 {
                    return Err(syntax(lineno, "expected `v <node-id> <label>`"));
                }
                let id = parse_index(f[1], lineno, "node id")?;
                if id != g.nodes.len() {
                    return Err(syntax(
                        lineno,
                        format!("node ids must be contiguous from 0: expected {}, found {id}", g.nodes.len()),
                    ));
                }
                g.nodes.push(node_labels.intern(f[2]));
            }
            "e" => {
                let g = raw.last_mut().ok_or_else(|| syntax(lineno, "edge before any `t` record"))?;
                let label = match (f.len(), unlabeled_edges) {
                    (4, true) | (3, true) => UNLABELED_EDGE,
                    (4, false) => f[3],
                    _ => return Err(syntax(lineno, "expected `e <u> <v> <label>`")),
                };
                let u = parse_index(f[1], lineno, "node index")?;
                let v = parse_index(f[2], lineno, "node index")?;
                g.edges.push((u, v, edge_labels.intern(label)));
            }
            other => return Err(syntax(lineno, format!("unknown record type {other:?}"))),
        }
    }

    let space = Arc::new(LabelSpace::new(node_labels, edge_labels));
    let graphs = raw
        .into_iter()
        .map(|r| {
            LabeledGraph::new(space.clone(), r.nodes, r.edges).map_err(|e| GraphError::InGraph {
                graph: r.id,
                line: r.line,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    GraphDataset::new(name, graphs)
}

/// Canonical serialization: graphs numbered from 0 in order, nodes ascending,
/// edges sorted by `(u, v)`.
pub fn write_dataset(d: &GraphDataset) -> String {
    let mut out = String::new();
    for (i, g) in d.graphs().iter().enumerate() {
        let _ = writeln!(out, "t # {i}");
        for n in 0..g.node_count() {
            let _ = writeln!(out, "v {n} {}", g.node_symbol(n));
        }
        for e in g.edges() {
            let _ = writeln!(out, "e {} {} {}", e.u, e.v, g.edge_symbol(e.label));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SMALL: &str = "t # 0\nv 0 A\nv 1 B\ne 0 1 x\n";

    #[test]
    fn smallest_graph() {
        let d = parse_dataset("d", SMALL, false).unwrap();
        assert_eq!(d.len(), 1);
        let g = &d.graphs()[0];
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
        assert_eq!(write_dataset(&d), SMALL);
        assert_eq!(write_dataset(&d), write_dataset(&d));
    }

    #[test]
    fn self_loop_rejected() {
        let err = parse_dataset("d", "t # 0\nv 0 A\ne 0 0 x\n", false).unwrap_err();
        match err {
            GraphError::InGraph { source, .. } => assert_eq!(*source, GraphError::SelfLoop { node: 0 }),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        let disc = "t # 0\nv 0 A\nv 1 A\nv 2 A\ne 0 1 x\n";
        assert!(matches!(
            parse_dataset("d", disc, false),
            Err(GraphError::InGraph { ref source, .. }) if **source == GraphError::Disconnected
        ));
        let dup = "t # 0\nv 0 A\nv 1 A\ne 0 1 x\ne 1 0 y\n";
        assert!(matches!(
            parse_dataset("d", dup, false),
            Err(GraphError::InGraph { ref source, .. }) if matches!(**source, GraphError::DuplicateEdge { .. })
        ));
        let dangling = "t # 0\nv 0 A\nv 1 A\ne 0 5 x\n";
        assert!(matches!(
            parse_dataset("d", dangling, false),
            Err(GraphError::InGraph { ref source, .. }) if matches!(**source, GraphError::DanglingNode { .. })
        ));
        let gap = "t # 0\nv 0 A\nv 2 A\n";
        assert!(matches!(parse_dataset("d", gap, false), Err(GraphError::Syntax { line: 3, .. })));
        assert!(matches!(parse_dataset("d", "v 0 A\n", false), Err(GraphError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_dataset("d", "t # 0\nv 0 A\nv 1 A\ne 0 1\n", false),
            Err(GraphError::Syntax { line: 4, .. })
        ));
        assert!(matches!(parse_dataset("d", "", false), Err(GraphError::EmptyDataset)));
    }

    #[test]
    fn comments_terminator_and_unlabeled_edges() {
        let text = "# header\n\nt # 7\nv 0 A # first\nv 1 B\ne 0 1 # no label\nt # -1\nt # 9\n";
        let d = parse_dataset("d", text, true).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.space().edge.symbols(), [UNLABELED_EDGE]);
        assert!(write_dataset(&d).contains("e 0 1 _\n"));
        // labeled tokens are overridden by the sentinel when the flag is set
        let d = parse_dataset("d", SMALL, true).unwrap();
        assert_eq!(d.space().edge.symbols(), [UNLABELED_EDGE]);
    }

    proptest! {
        #[test]
        fn write_parse_roundtrip(seed in any::<u64>(), count in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = space(&["C", "N", "O", "S"], &["1", "2", "3"]);
            let graphs = (0..count)
                .map(|_| { let n = rand::Rng::gen_range(&mut rng, 1..8); random_graph(&mut rng, &s, n, 0.3) })
                .collect();
            let d = GraphDataset::new("p", graphs).unwrap();
            let text = write_dataset(&d);
            let back = parse_dataset("p", &text, false).unwrap();
            prop_assert_eq!(&back, &d);
            prop_assert_eq!(write_dataset(&back), text);
        }
    }
}
