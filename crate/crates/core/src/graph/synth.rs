use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphDataset, GraphError, LabelSet, LabelSpace, LabeledGraph, UNLABELED_EDGE};

const MAX_REJECTIONS: usize = 100_000;

/// Parameters of the N-body spring generator.
///
/// Particles sit in a `grid_side x grid_side` partition of the plane and are
/// labeled by their cell; every pair is joined by a spring independently
/// with probability `edge_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringConfig {
    pub particles: usize,
    pub count: usize,
    pub grid_side: usize,
    pub edge_prob: f64,
    pub seed: u64,
}

impl SpringConfig {
    pub fn new(particles: usize, count: usize, seed: u64) -> Self {
        Self { particles, count, grid_side: 5, edge_prob: 0.5, seed }
    }
}

/// Cell label for row `r`, column `c`.
pub fn cell_symbol(r: usize, c: usize) -> String {
    format!("r{r}c{c}")
}

/// Generates `count` connected spring graphs. Disconnected draws are
/// discarded and the whole graph is resampled.
pub fn synth_spring(cfg: &SpringConfig) -> Result<GraphDataset, GraphError> {
    if cfg.particles < 2 {
        return Err(GraphError::InvalidConfig("need at least 2 particles".into()));
    }
    if !(cfg.edge_prob > 0.0 && cfg.edge_prob <= 1.0) {
        return Err(GraphError::InvalidConfig(format!("edge probability {} not in (0, 1]", cfg.edge_prob)));
    }
    if cfg.grid_side == 0 || cfg.count == 0 {
        return Err(GraphError::InvalidConfig("grid side and count must be positive".into()));
    }
    let side = cfg.grid_side;
    let cells = LabelSet::from_symbols((0..side * side).map(|i| cell_symbol(i / side, i % side)));
    let space = Arc::new(LabelSpace::new(cells, LabelSet::from_symbols([UNLABELED_EDGE])));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.particles;
    let mut graphs = Vec::with_capacity(cfg.count);
    let mut rejections = 0;
    while graphs.len() < cfg.count {
        let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..(side * side) as u32)).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(cfg.edge_prob) {
                    edges.push((u, v, 0));
                }
            }
        }
        match LabeledGraph::new(space.clone(), labels, edges) {
            Ok(g) => graphs.push(g),
            Err(GraphError::Disconnected) => {
                rejections += 1;
                if rejections >= MAX_REJECTIONS {
                    return Err(GraphError::TooManyRejections(rejections));
                }
            }
            Err(e) => return Err(e),
        }
    }
    GraphDataset::new(format!("spring-{n}"), graphs)
}
