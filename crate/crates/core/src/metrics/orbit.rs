use crate::graph::LabeledGraph;

/// Number of automorphism orbits across the six connected 4-node graphlets.
pub const ORBITS: usize = 11;

/// Orbit names in index order.
pub const ORBIT_NAMES: [&str; ORBITS] = [
    "path-end",
    "path-middle",
    "star-leaf",
    "star-center",
    "cycle",
    "paw-pendant",
    "paw-triangle",
    "paw-hub",
    "diamond-side",
    "diamond-chord",
    "clique",
];

struct Dense {
    n: usize,
    bits: Vec<bool>,
}

impl Dense {
    fn new(g: &LabeledGraph) -> Self {
        let n = g.node_count();
        let mut bits = vec![false; n * n];
        for e in g.edges() {
            bits[e.u * n + e.v] = true;
            bits[e.v * n + e.u] = true;
        }
        Self { n, bits }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.n + b]
    }
}

/// Orbit of each member of a connected 4-node set, read off the induced
/// edge count and the induced degrees.
fn classify(adj: &Dense, set: &[usize; 4]) -> [usize; 4] {
    let mut deg = [0usize; 4];
    for i in 0..4 {
        for j in i + 1..4 {
            if adj.has(set[i], set[j]) {
                deg[i] += 1;
                deg[j] += 1;
            }
        }
    }
    let edges = deg.iter().sum::<usize>() / 2;
    let has_hub = deg.contains(&3);
    deg.map(|d| match (edges, has_hub, d) {
        (3, false, 1) => 0,
        (3, false, _) => 1,
        (3, true, 1) => 2,
        (3, true, _) => 3,
        (4, false, _) => 4,
        (4, true, 1) => 5,
        (4, true, 2) => 6,
        (4, true, _) => 7,
        (5, _, 2) => 8,
        (5, _, _) => 9,
        _ => 10,
    })
}

/// Visits every connected induced 4-node subgraph exactly once.
fn connected_quads(g: &LabeledGraph, mut visit: impl FnMut(&[usize; 4])) {
    fn extend(
        g: &LabeledGraph,
        adj: &Dense,
        root: usize,
        sub: &mut Vec<usize>,
        mut ext: Vec<usize>,
        visit: &mut dyn FnMut(&[usize; 4]),
    ) {
        if sub.len() == 4 {
            visit(&[sub[0], sub[1], sub[2], sub[3]]);
            return;
        }
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &(u, _) in g.neighbors(w) {
                let exclusive = u > root
                    && !sub.contains(&u)
                    && !next.contains(&u)
                    && !sub.iter().any(|&s| s == u || adj.has(s, u));
                if exclusive {
                    next.push(u);
                }
            }
            sub.push(w);
            extend(g, adj, root, sub, next, visit);
            sub.pop();
        }
    }
    let adj = Dense::new(g);
    for v in 0..g.node_count() {
        let ext = g.neighbors(v).iter().map(|&(w, _)| w).filter(|&w| w > v).collect();
        extend(g, &adj, v, &mut vec![v], ext, &mut visit);
    }
}

/// Per-node counts of appearances in each 4-node graphlet orbit.
pub fn orbit_counts(g: &LabeledGraph) -> Vec<[u64; ORBITS]> {
    let adj = Dense::new(g);
    let mut counts = vec![[0u64; ORBITS]; g.node_count()];
    connected_quads(g, |set| {
        for (v, o) in set.iter().zip(classify(&adj, set)) {
            counts[*v][o] += 1;
        }
    });
    counts
}

/// Orbit counts averaged over the nodes of `g`.
pub fn mean_orbit_counts(g: &LabeledGraph) -> Vec<f64> {
    let counts = orbit_counts(g);
    let n = counts.len() as f64;
    (0..ORBITS).map(|o| counts.iter().map(|c| c[o] as f64).sum::<f64>() / n).collect()
}
