use std::sync::Arc;

use super::ModelError;
use crate::canon::{min_dfs_code, DfsCode, EdgeTuple};
use crate::graph::{GraphDataset, LabelOrder, LabelSpace};

/// The five fields of an edge tuple, in prediction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    FromTime,
    ToTime,
    FromLabel,
    EdgeLabel,
    ToLabel,
}

impl Component {
    pub const ALL: [Component; 5] =
        [Component::FromTime, Component::ToTime, Component::FromLabel, Component::EdgeLabel, Component::ToLabel];

    pub fn name(&self) -> &'static str {
        match self {
            Component::FromTime => "from_time",
            Component::ToTime => "to_time",
            Component::FromLabel => "from_label",
            Component::EdgeLabel => "edge_label",
            Component::ToLabel => "to_label",
        }
    }
}

/// Raw per-component token indices; index `size - 1` of a component is EOS.
pub type Token = [usize; 5];

/// Symbol spaces of the five tuple components.
///
/// Timestamps use tokens `0..max_timestamp`, labels use the ids of `labels`,
/// and every component appends one EOS token.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    max_timestamp: usize,
    labels: Arc<LabelSpace>,
}

impl Vocabulary {
    pub fn new(max_timestamp: usize, labels: Arc<LabelSpace>) -> Result<Self, ModelError> {
        if max_timestamp < 2 || labels.node.is_empty() || labels.edge.is_empty() {
            return Err(ModelError::Vocabulary(
                "need at least two timestamps, one node label and one edge label".into(),
            ));
        }
        Ok(Self { max_timestamp, labels })
    }

    pub fn max_timestamp(&self) -> usize {
        self.max_timestamp
    }

    pub fn labels(&self) -> &Arc<LabelSpace> {
        &self.labels
    }

    pub fn sizes(&self) -> [usize; 5] {
        let t = self.max_timestamp + 1;
        let n = self.labels.node.len() + 1;
        let e = self.labels.edge.len() + 1;
        [t, t, n, e, n]
    }

    pub fn size(&self, c: Component) -> usize {
        self.sizes()[c as usize]
    }

    pub fn eos(&self, c: Component) -> usize {
        self.size(c) - 1
    }

    pub fn eos_token(&self) -> Token {
        self.sizes().map(|s| s - 1)
    }

    /// Start of each component's block in the concatenated encoding.
    pub fn offsets(&self) -> [usize; 5] {
        let s = self.sizes();
        let mut o = [0; 5];
        for k in 1..5 {
            o[k] = o[k - 1] + s[k - 1];
        }
        o
    }

    /// Length of the concatenated one-hot encoding.
    pub fn input_dim(&self) -> usize {
        self.sizes().iter().sum()
    }

    pub fn tuple_token(&self, t: &EdgeTuple) -> Result<Token, ModelError> {
        let tok = [t.from_time, t.to_time, t.from_label as usize, t.edge_label as usize, t.to_label as usize];
        let sizes = self.sizes();
        for (k, c) in Component::ALL.iter().enumerate() {
            if tok[k] >= sizes[k] - 1 {
                return Err(ModelError::OutOfVocabulary { component: c.name(), value: tok[k], limit: sizes[k] - 1 });
            }
        }
        Ok(tok)
    }

    /// Canonical codes of every graph in `d`, expressed in this vocabulary.
    pub fn encode_dataset(&self, d: &GraphDataset) -> Result<Vec<DfsCode>, ModelError> {
        let graphs = d.graphs_in(&self.labels)?;
        graphs
            .iter()
            .map(|g| {
                if g.node_count() > self.max_timestamp {
                    return Err(ModelError::Vocabulary(format!(
                        "graph with {} nodes exceeds max timestamp {}",
                        g.node_count(),
                        self.max_timestamp
                    )));
                }
                if g.edge_count() == 0 {
                    return Err(ModelError::Vocabulary("single-node graphs have no DFS code".into()));
                }
                Ok(min_dfs_code(g))
            })
            .collect()
    }
}

/// Vocabulary covering every graph of every dataset: `max_timestamp` is the
/// largest node count and the label spaces are merged.
pub fn build_vocabulary(datasets: &[&GraphDataset], order: LabelOrder) -> Result<Vocabulary, ModelError> {
    if datasets.is_empty() {
        return Err(ModelError::Vocabulary("no datasets given".into()));
    }
    let max_nodes = datasets.iter().map(|d| d.max_nodes()).max().unwrap_or(0);
    let labels = LabelSpace::union(datasets.iter().map(|d| d.space().as_ref()), order);
    Vocabulary::new(max_nodes, Arc::new(labels))
}

/// Concatenated one-hot encoding of one tuple, or the all-zero SOS vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVector {
    /// positions of the five ones in the concatenated vector; `None` for SOS
    hot: Option<[usize; 5]>,
    dim: usize,
}

impl TokenVector {
    pub fn sos(v: &Vocabulary) -> Self {
        Self { hot: None, dim: v.input_dim() }
    }

    /// Encodes a raw token, EOS entries included.
    pub fn from_token(tok: &Token, v: &Vocabulary) -> Result<Self, ModelError> {
        let sizes = v.sizes();
        let offsets = v.offsets();
        let mut hot = [0; 5];
        for k in 0..5 {
            if tok[k] >= sizes[k] {
                return Err(ModelError::OutOfVocabulary {
                    component: Component::ALL[k].name(),
                    value: tok[k],
                    limit: sizes[k],
                });
            }
            hot[k] = offsets[k] + tok[k];
        }
        Ok(Self { hot: Some(hot), dim: v.input_dim() })
    }

    pub fn hot(&self) -> Option<&[usize; 5]> {
        self.hot.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        if let Some(hot) = &self.hot {
            for &i in hot {
                x[i] = 1.0;
            }
        }
        x
    }
}

pub fn encode_tuple(t: &EdgeTuple, v: &Vocabulary) -> Result<TokenVector, ModelError> {
    TokenVector::from_token(&v.tuple_token(t)?, v)
}

pub fn decode_tuple(x: &TokenVector, v: &Vocabulary) -> Result<EdgeTuple, ModelError> {
    let hot = x.hot.ok_or_else(|| ModelError::Vocabulary("SOS does not decode to a tuple".into()))?;
    let offsets = v.offsets();
    let sizes = v.sizes();
    let mut tok = [0; 5];
    for k in 0..5 {
        tok[k] = hot[k] - offsets[k];
        if tok[k] == sizes[k] - 1 {
            return Err(ModelError::Vocabulary(format!("{} is EOS", Component::ALL[k].name())));
        }
    }
    Ok(EdgeTuple::new(tok[0], tok[1], tok[2] as u32, tok[3] as u32, tok[4] as u32))
}
