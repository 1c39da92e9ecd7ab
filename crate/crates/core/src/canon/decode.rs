use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use super::{CanonError, DfsCode, EdgeTuple};
use crate::graph::{LabelSpace, LabeledGraph};

/// Why a tuple sequence is not a DFS code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    /// no tuples at all
    Empty,
    /// first tuple is not `(0, 1, ..)`
    BadStart,
    /// `from_time == to_time`
    SelfLoop,
    /// a forward edge does not introduce the next unused timestamp
    TimestampGap,
    /// a timestamp is referenced before it is introduced
    UnknownTimestamp,
    /// an edge leaves from, or a backward edge lands on, a node off the
    /// rightmost path
    OffRightmostPath,
    /// backward edges from one node are not in increasing target order
    BackwardOrder,
    /// the same node pair appears twice
    DuplicateEdge,
    /// a node's label differs from the label it was introduced with
    LabelConflict,
    /// a label id outside the vocabulary
    UnknownLabel,
    /// the sampler hit its length cap before emitting EOS
    Truncated,
}

impl Violation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Violation::Empty => "empty",
            Violation::BadStart => "bad-start",
            Violation::SelfLoop => "self-loop",
            Violation::TimestampGap => "timestamp-gap",
            Violation::UnknownTimestamp => "unknown-timestamp",
            Violation::OffRightmostPath => "off-rightmost-path",
            Violation::BackwardOrder => "backward-order",
            Violation::DuplicateEdge => "duplicate-edge",
            Violation::LabelConflict => "label-conflict",
            Violation::UnknownLabel => "unknown-label",
            Violation::Truncated => "truncated",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Incremental checker for the DFS-code invariants.
struct CodeState<'a> {
    space: Option<&'a LabelSpace>,
    labels: Vec<u32>,
    path: Vec<usize>,
    edges: HashSet<(usize, usize)>,
    prev: Option<EdgeTuple>,
}

impl<'a> CodeState<'a> {
    fn new(space: Option<&'a LabelSpace>) -> Self {
        Self { space, labels: Vec::new(), path: Vec::new(), edges: HashSet::new(), prev: None }
    }

    fn check(&self, t: &EdgeTuple) -> Result<(), Violation> {
        if let Some(space) = self.space {
            if !space.node.contains_id(t.from_label)
                || !space.node.contains_id(t.to_label)
                || !space.edge.contains_id(t.edge_label)
            {
                return Err(Violation::UnknownLabel);
            }
        }
        if self.labels.is_empty() {
            return if (t.from_time, t.to_time) == (0, 1) { Ok(()) } else { Err(Violation::BadStart) };
        }
        let known = self.labels.len();
        if t.from_time == t.to_time {
            return Err(Violation::SelfLoop);
        }
        if t.is_forward() {
            if t.from_time >= known {
                return Err(Violation::UnknownTimestamp);
            }
            if t.to_time != known {
                return Err(Violation::TimestampGap);
            }
            if !self.path.contains(&t.from_time) {
                return Err(Violation::OffRightmostPath);
            }
            if self.labels[t.from_time] != t.from_label {
                return Err(Violation::LabelConflict);
            }
        } else {
            if t.from_time >= known {
                return Err(Violation::UnknownTimestamp);
            }
            if Some(&t.from_time) != self.path.last() || !self.path.contains(&t.to_time) {
                return Err(Violation::OffRightmostPath);
            }
            if self.labels[t.from_time] != t.from_label || self.labels[t.to_time] != t.to_label {
                return Err(Violation::LabelConflict);
            }
            if self.edges.contains(&(t.to_time, t.from_time)) {
                return Err(Violation::DuplicateEdge);
            }
            if let Some(p) = self.prev {
                if !p.is_forward() && p.from_time == t.from_time && p.to_time >= t.to_time {
                    return Err(Violation::BackwardOrder);
                }
            }
        }
        Ok(())
    }

    fn push(&mut self, t: &EdgeTuple) {
        if self.labels.is_empty() {
            self.labels = vec![t.from_label, t.to_label];
            self.path = vec![0, 1];
        } else if t.is_forward() {
            self.labels.push(t.to_label);
            let keep = self.path.iter().position(|&x| x == t.from_time).unwrap() + 1;
            self.path.truncate(keep);
            self.path.push(t.to_time);
        }
        let key = (t.from_time.min(t.to_time), t.from_time.max(t.to_time));
        self.edges.insert(key);
        self.prev = Some(*t);
    }
}

/// Checks every DFS-code invariant; returns the first offending position.
///
/// With `space`, label ids must also lie inside its vocabularies.
pub fn validate_code(
    tuples: &[EdgeTuple],
    space: Option<&LabelSpace>,
) -> Result<(), (usize, Violation)> {
    if tuples.is_empty() {
        return Err((0, Violation::Empty));
    }
    let mut state = CodeState::new(space);
    for (i, t) in tuples.iter().enumerate() {
        state.check(t).map_err(|v| (i, v))?;
        state.push(t);
    }
    Ok(())
}

/// Rebuilds the graph a valid code describes: one node per timestamp,
/// labeled at introduction, and one edge per tuple.
pub fn code_to_graph(code: &DfsCode, space: &Arc<LabelSpace>) -> Result<LabeledGraph, CanonError> {
    validate_code(code.tuples(), Some(space))
        .map_err(|(position, violation)| CanonError::InvalidCode { position, violation })?;
    let mut nodes = Vec::with_capacity(code.node_count());
    let mut edges = Vec::with_capacity(code.len());
    for t in code.tuples() {
        if nodes.is_empty() {
            nodes.push(t.from_label);
        }
        if t.is_forward() {
            nodes.push(t.to_label);
        }
        edges.push((t.from_time, t.to_time, t.edge_label));
    }
    Ok(LabeledGraph::new(space.clone(), nodes, edges)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepairMode {
    /// reject any violation
    #[default]
    Strict,
    /// drop duplicate-edge tuples and truncate at the first other violation
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairAction {
    Dropped,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepairNote {
    pub position: usize,
    pub violation: Violation,
    pub action: RepairAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub code: DfsCode,
    pub notes: Vec<RepairNote>,
}

/// Turns a raw tuple sequence into a valid code, or reports why it cannot.
pub fn repair_code(
    tuples: &[EdgeTuple],
    mode: RepairMode,
    space: Option<&LabelSpace>,
) -> Result<Repaired, (usize, Violation)> {
    match mode {
        RepairMode::Strict => {
            validate_code(tuples, space)?;
            Ok(Repaired { code: DfsCode::from_tuples(tuples.to_vec()), notes: vec![] })
        }
        RepairMode::Lenient => {
            let mut state = CodeState::new(space);
            let mut kept = Vec::new();
            let mut notes = Vec::new();
            for (i, t) in tuples.iter().enumerate() {
                match state.check(t) {
                    Ok(()) => {
                        state.push(t);
                        kept.push(*t);
                    }
                    Err(Violation::DuplicateEdge) => notes.push(RepairNote {
                        position: i,
                        violation: Violation::DuplicateEdge,
                        action: RepairAction::Dropped,
                    }),
                    Err(v) => {
                        notes.push(RepairNote { position: i, violation: v, action: RepairAction::Truncated });
                        break;
                    }
                }
            }
            if kept.is_empty() {
                let v = notes.first().map_or(Violation::Empty, |n| n.violation);
                return Err((0, v));
            }
            Ok(Repaired { code: DfsCode::from_tuples(kept), notes })
        }
    }
}
