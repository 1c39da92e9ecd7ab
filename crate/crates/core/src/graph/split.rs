use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphDataset, GraphError};

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self, GraphError> {
        let spec = Self { train, validation, test, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        for (name, f) in [("train", self.train), ("validation", self.validation), ("test", self.test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(GraphError::InvalidSplit(format!("{name} fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GraphError::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Part sizes for `n` graphs: validation and test are floored, train
    /// takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let val = floor(self.validation);
        let test = floor(self.test).min(n - val);
        (n - val - test, val, test)
    }
}

/// Seeded disjoint partition. Each part keeps the input's relative order.
/// Empty parts come back as `None`.
pub fn split_dataset(
    d: &GraphDataset,
    spec: &SplitSpec,
) -> Result<[Option<GraphDataset>; 3], GraphError> {
    spec.validate()?;
    let n = d.len();
    let (n_train, n_val, _) = spec.sizes(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut parts = [
        idx[..n_train].to_vec(),
        idx[n_train..n_train + n_val].to_vec(),
        idx[n_train + n_val..].to_vec(),
    ];
    let names = ["train", "validation", "test"];
    let mut out: [Option<GraphDataset>; 3] = [None, None, None];
    for (k, part) in parts.iter_mut().enumerate() {
        part.sort_unstable();
        if part.is_empty() {
            continue;
        }
        let graphs = part.iter().map(|&i| d.graphs()[i].clone()).collect();
        out[k] = Some(GraphDataset::new(format!("{}-{}", d.name(), names[k]), graphs)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{write_dataset, LabeledGraph, testutil::*};

    fn dataset(n: usize) -> GraphDataset {
        let s = space(&["A", "B", "C", "D", "E", "F", "G", "H", "I", "J"], &["x"]);
        let graphs = (0..n)
            .map(|i| LabeledGraph::new(s.clone(), vec![(i % 10) as u32, 0], [(0, 1, 0)]).unwrap())
            .collect();
        GraphDataset::new("d", graphs).unwrap()
    }

    fn count(p: &Option<GraphDataset>) -> usize {
        p.as_ref().map_or(0, GraphDataset::len)
    }

    #[test]
    fn exact_fractions() {
        let d = dataset(10);
        let parts = split_dataset(&d, &SplitSpec::new(0.4, 0.3, 0.3, 1).unwrap()).unwrap();
        assert_eq!((count(&parts[0]), count(&parts[1]), count(&parts[2])), (4, 3, 3));
    }

    #[test]
    fn remainder_goes_to_train() {
        let d = dataset(11);
        let parts = split_dataset(&d, &SplitSpec::new(0.4, 0.3, 0.3, 1).unwrap()).unwrap();
        assert_eq!((count(&parts[0]), count(&parts[1]), count(&parts[2])), (5, 3, 3));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let d = dataset(40);
        let spec = SplitSpec::new(0.5, 0.25, 0.25, 99).unwrap();
        let a = split_dataset(&d, &spec).unwrap();
        let b = split_dataset(&d, &spec).unwrap();
        for k in 0..3 {
            assert_eq!(
                write_dataset(a[k].as_ref().unwrap()),
                write_dataset(b[k].as_ref().unwrap())
            );
        }
        let mut labels: Vec<String> = a
            .iter()
            .flatten()
            .flat_map(|p| p.graphs().iter().map(|g| g.node_symbol(0).to_owned()).collect::<Vec<_>>())
            .collect();
        let mut expected: Vec<String> = d.graphs().iter().map(|g| g.node_symbol(0).to_owned()).collect();
        labels.sort();
        expected.sort();
        assert_eq!(labels, expected);
    }

    #[test]
    fn everything_to_train() {
        let d = dataset(7);
        let parts = split_dataset(&d, &SplitSpec::new(1.0, 0.0, 0.0, 3).unwrap()).unwrap();
        assert_eq!(count(&parts[0]), 7);
        assert!(parts[1].is_none() && parts[2].is_none());
    }

    #[test]
    fn rejects_bad_fractions() {
        assert!(SplitSpec::new(0.5, 0.5, 0.5, 0).is_err());
        assert!(SplitSpec::new(1.2, -0.1, -0.1, 0).is_err());
    }
}
