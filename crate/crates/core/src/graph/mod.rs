//! Labeled graphs, label vocabularies and graph datasets.
//!
//! A [`LabeledGraph`] is undirected, connected, free of self-loops and
//! parallel edges, and carries one categorical label per node and per edge.
//! Labels are small integer ids that index into a shared [`LabelSpace`].

mod io;
mod iso;
mod split;
mod synth;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use io::{parse_dataset, write_dataset};
pub use iso::{is_isomorphic, is_subgraph};
pub use split::{split_dataset, SplitSpec};
pub use synth::{synth_spring, SpringConfig};

/// Edge label used by datasets that carry no edge labels.
pub const UNLABELED_EDGE: &str = "_";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("graph {graph} (line {line}): {source}")]
    InGraph {
        graph: String,
        line: usize,
        #[source]
        source: Box<GraphError>,
    },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge references node {node} but the graph has {nodes} nodes")]
    DanglingNode { node: usize, nodes: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no nodes")]
    Empty,
    #[error("unknown {kind} label id {id}")]
    UnknownLabel { kind: &'static str, id: u32 },
    #[error("label {symbol:?} is missing from the target vocabulary")]
    MissingSymbol { symbol: String },
    #[error("graphs use different label vocabularies")]
    VocabularyMismatch,
    #[error("node permutation is not a bijection on 0..{nodes}")]
    NotAPermutation { nodes: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dataset contains no graphs")]
    EmptyDataset,
    #[error("gave up after {0} rejected samples")]
    TooManyRejections(usize),
    #[error("invalid generator setting: {0}")]
    InvalidConfig(String),
}

/// Interned label symbols with contiguous ids.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = Self::new();
        for s in symbols {
            set.intern(s.as_ref());
        }
        set
    }

    /// Returns the id of `symbol`, adding it at the end if it is new.
    pub fn intern(&mut self, symbol: &str) -> u32 {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(symbol.to_owned());
        self.index.insert(symbol.to_owned(), id);
        id
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn contains_id(&self, id: u32) -> bool {
        (id as usize) < self.symbols.len()
    }
}

impl PartialEq for LabelSet {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Eq for LabelSet {}

/// How label ids are ordered when vocabularies are merged.
///
/// Label order decides the tie-break between structurally equal DFS tuples,
/// so it changes which code is minimal (never whether two graphs share one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelOrder {
    /// Ids follow first appearance.
    #[default]
    FirstAppearance,
    /// Ids follow byte-wise symbol order.
    Symbol,
}

/// Node and edge vocabularies shared by the graphs of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSpace {
    pub node: LabelSet,
    pub edge: LabelSet,
}

impl LabelSpace {
    pub fn new(node: LabelSet, edge: LabelSet) -> Self {
        Self { node, edge }
    }

    /// Union of several spaces, in the requested id order.
    pub fn union<'a, I>(spaces: I, order: LabelOrder) -> Self
    where
        I: IntoIterator<Item = &'a LabelSpace>,
    {
        let mut node = LabelSet::new();
        let mut edge = LabelSet::new();
        for space in spaces {
            for s in space.node.symbols() {
                node.intern(s);
            }
            for s in space.edge.symbols() {
                edge.intern(s);
            }
        }
        match order {
            LabelOrder::FirstAppearance => Self { node, edge },
            LabelOrder::Symbol => {
                let mut n = node.symbols().to_vec();
                let mut e = edge.symbols().to_vec();
                n.sort();
                e.sort();
                Self {
                    node: LabelSet::from_symbols(n),
                    edge: LabelSet::from_symbols(e),
                }
            }
        }
    }

    /// True when the only edge label is the unlabeled sentinel.
    pub fn edges_unlabeled(&self) -> bool {
        self.edge.symbols().iter().all(|s| s == UNLABELED_EDGE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub label: u32,
}

/// An undirected, connected graph with one label per node and per edge.
///
/// Edges are stored once with `u < v`, sorted by `(u, v)`.
#[derive(Clone)]
pub struct LabeledGraph {
    space: Arc<LabelSpace>,
    nodes: Vec<u32>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, u32)>>,
}

impl LabeledGraph {
    /// Builds and validates a graph. Edge endpoints may be given in any order.
    pub fn new(
        space: Arc<LabelSpace>,
        nodes: Vec<u32>,
        edges: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        for &l in &nodes {
            if !space.node.contains_id(l) {
                return Err(GraphError::UnknownLabel { kind: "node", id: l });
            }
        }
        let n = nodes.len();
        let mut list = Vec::new();
        for (a, b, label) in edges {
            if a >= n || b >= n {
                return Err(GraphError::DanglingNode { node: a.max(b), nodes: n });
            }
            if a == b {
                return Err(GraphError::SelfLoop { node: a });
            }
            if !space.edge.contains_id(label) {
                return Err(GraphError::UnknownLabel { kind: "edge", id: label });
            }
            list.push(Edge { u: a.min(b), v: a.max(b), label });
        }
        list.sort();
        for w in list.windows(2) {
            if (w[0].u, w[0].v) == (w[1].u, w[1].v) {
                return Err(GraphError::DuplicateEdge { u: w[0].u, v: w[0].v });
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &list {
            adjacency[e.u].push((e.v, e.label));
            adjacency[e.v].push((e.u, e.label));
        }
        let g = Self { space, nodes, edges: list, adjacency };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == n
    }

    pub fn space(&self) -> &Arc<LabelSpace> {
        &self.space
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_labels(&self) -> &[u32] {
        &self.nodes
    }

    pub fn node_label(&self, node: usize) -> u32 {
        self.nodes[node]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `node` with the label of the connecting edge.
    pub fn neighbors(&self, node: usize) -> &[(usize, u32)] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<(usize, u32)>] {
        &self.adjacency
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_label(&self, a: usize, b: usize) -> Option<u32> {
        self.adjacency[a].iter().find(|&&(x, _)| x == b).map(|&(_, l)| l)
    }

    pub fn node_symbol(&self, node: usize) -> &str {
        self.space.node.symbol(self.nodes[node]).unwrap_or("?")
    }

    pub fn edge_symbol(&self, label: u32) -> &str {
        self.space.edge.symbol(label).unwrap_or("?")
    }

    /// Re-expresses the graph over `target`, matching labels by symbol.
    pub fn remap(&self, target: &Arc<LabelSpace>) -> Result<Self, GraphError> {
        if Arc::ptr_eq(&self.space, target) || *self.space == **target {
            return Ok(Self { space: target.clone(), ..self.clone() });
        }
        let lookup = |set: &LabelSet, from: &LabelSet, id: u32| {
            let sym = from.symbol(id).unwrap_or_default();
            set.id(sym).ok_or_else(|| GraphError::MissingSymbol { symbol: sym.to_owned() })
        };
        let nodes = self
            .nodes
            .iter()
            .map(|&l| lookup(&target.node, &self.space.node, l))
            .collect::<Result<Vec<_>, _>>()?;
        let edges = self
            .edges
            .iter()
            .map(|e| Ok((e.u, e.v, lookup(&target.edge, &self.space.edge, e.label)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::new(target.clone(), nodes, edges)
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        if perm.len() != n {
            return Err(GraphError::NotAPermutation { nodes: n });
        }
        for &p in perm {
            if p >= n || seen[p] {
                return Err(GraphError::NotAPermutation { nodes: n });
            }
            seen[p] = true;
        }
        let mut nodes = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = self.nodes[old];
        }
        let edges = self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.label));
        Self::new(self.space.clone(), nodes, edges)
    }
}

/// Applies a node permutation; see [`LabeledGraph::permute`].
pub fn permute_graph(g: &LabeledGraph, perm: &[usize]) -> Result<LabeledGraph, GraphError> {
    g.permute(perm)
}

impl PartialEq for LabeledGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && (Arc::ptr_eq(&self.space, &other.space) || self.space == other.space)
    }
}

impl fmt::Debug for LabeledGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nodes: Vec<&str> = (0..self.node_count()).map(|i| self.node_symbol(i)).collect();
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|e| format!("{}-{}:{}", e.u, e.v, self.edge_symbol(e.label)))
            .collect();
        f.debug_struct("LabeledGraph").field("nodes", &nodes).field("edges", &edges).finish()
    }
}

/// A named, ordered collection of graphs over one label space.
///
/// The label space always lists exactly the labels the graphs use, in order
/// of first appearance (graphs in order, nodes ascending, edges by `(u, v)`).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    name: String,
    space: Arc<LabelSpace>,
    graphs: Vec<LabeledGraph>,
}

impl GraphDataset {
    /// Builds a dataset, re-indexing labels into first-appearance order.
    pub fn new(name: impl Into<String>, graphs: Vec<LabeledGraph>) -> Result<Self, GraphError> {
        if graphs.is_empty() {
            return Err(GraphError::EmptyDataset);
        }
        let mut node = LabelSet::new();
        let mut edge = LabelSet::new();
        for g in &graphs {
            for i in 0..g.node_count() {
                node.intern(g.node_symbol(i));
            }
            for e in g.edges() {
                edge.intern(g.edge_symbol(e.label));
            }
        }
        let space = Arc::new(LabelSpace { node, edge });
        let graphs = graphs.iter().map(|g| g.remap(&space)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { name: name.into(), space, graphs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<LabelSpace> {
        &self.space
    }

    pub fn graphs(&self) -> &[LabeledGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// All graphs re-expressed over `target`.
    pub fn graphs_in(&self, target: &Arc<LabelSpace>) -> Result<Vec<LabeledGraph>, GraphError> {
        self.graphs.iter().map(|g| g.remap(target)).collect()
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(LabeledGraph::node_count).max().unwrap_or(0)
    }

    pub fn max_edges(&self) -> usize {
        self.graphs.iter().map(LabeledGraph::edge_count).max().unwrap_or(0)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    pub fn space(nodes: &[&str], edges: &[&str]) -> Arc<LabelSpace> {
        Arc::new(LabelSpace::new(LabelSet::from_symbols(nodes), LabelSet::from_symbols(edges)))
    }

    /// Random connected graph: random spanning tree plus extra edges.
    pub fn random_graph<R: Rng>(
        rng: &mut R,
        space: &Arc<LabelSpace>,
        n: usize,
        extra_edge_prob: f64,
    ) -> LabeledGraph {
        let nl = space.node.len() as u32;
        let el = space.edge.len() as u32;
        let nodes: Vec<u32> = (0..n).map(|_| rng.gen_range(0..nl)).collect();
        let mut present = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            present[u][v] = true;
            edges.push((u, v, rng.gen_range(0..el)));
        }
        for u in 0..n {
            for v in u + 1..n {
                if !present[u][v] && rng.gen_bool(extra_edge_prob) {
                    edges.push((u, v, rng.gen_range(0..el)));
                }
            }
        }
        LabeledGraph::new(space.clone(), nodes, edges).unwrap()
    }

    pub fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        p
    }
}
