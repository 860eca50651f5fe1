//! Isolation forest.

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

use super::spec::{DetectorParams, DetectorSpec, FitMetadata, IsofParams, ScoreVector};
use super::{labels_above, quantile_threshold};

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Average unsuccessful-search path length in a binary search tree of `n` nodes.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn grow(x: &Matrix, rows: Vec<usize>, height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.build(x, rows, 0, height_limit, rng);
        tree
    }

    fn build(
        &mut self,
        x: &Matrix,
        rows: Vec<usize>,
        depth: usize,
        limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= limit || rows.len() <= 1 {
            return id;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..x.ncols())
            .filter_map(|j| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = x.get(r, j);
                    (lo.min(v), hi.max(v))
                });
                (hi > lo).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let mut value = rng.random_range(lo..hi);
        if value <= lo {
            value = lo + (hi - lo) * 0.5;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x.get(i, feature) < value);
        let left = self.build(x, l, depth + 1, limit, rng);
        let right = self.build(x, r, depth + 1, limit, rng);
        self.nodes[id] = Node::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }

    pub fn path_length(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[id] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    id = if row[feature] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub subsample: usize,
}

impl IsolationForest {
    pub fn fit(x: &Matrix, params: &IsofParams, seed: u64) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if params.n_trees == 0 || params.subsample < 2 {
            return Err(Error::Parameter(
                "isolation forest needs n_trees >= 1 and subsample >= 2".into(),
            ));
        }
        let psi = params.subsample.min(n);
        let limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, t as u64);
                let rows = sample(&mut rng, n, psi).into_vec();
                IsolationTree::grow(x, rows, limit, &mut rng)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            subsample: psi,
        })
    }

    pub fn mean_path_length(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(psi))`, in `(0, 1]`.
    pub fn anomaly_score(&self, mean_path: f64) -> f64 {
        let c = average_path_length(self.subsample);
        if c > 0.0 {
            2f64.powf(-mean_path / c)
        } else {
            1.0
        }
    }
}

pub fn score_isolation_forest(x: &Matrix, params: &IsofParams, seed: u64) -> Result<ScoreVector> {
    let start = Instant::now();
    let forest = IsolationForest::fit(x, params, seed)?;
    let paths: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|i| forest.mean_path_length(x.row(i)))
        .collect();
    let scores: Vec<f64> = paths.iter().map(|&h| forest.anomaly_score(h)).collect();
    let threshold = quantile_threshold(&scores, params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Isof(*params), seed),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Isolation {
            n_trees: params.n_trees,
            subsample: forest.subsample,
            mean_path_length: paths,
        },
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_path_length_small_values() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2 (ln 255 + gamma) - 2 * 255 / 256
        let expected = 2.0 * (255f64.ln() + 0.5772156649) - 2.0 * 255.0 / 256.0;
        assert!((average_path_length(256) - expected).abs() < 1e-12);
    }

    #[test]
    fn isolated_point_is_shallow() {
        let mut rows: Vec<[f64; 2]> = (0..300)
            .map(|i| [((i * 37) % 101) as f64 / 101.0, ((i * 53) % 97) as f64 / 97.0])
            .collect();
        rows.push([8.0, 8.0]);
        let x = Matrix::from_rows(&rows).unwrap();
        let s = score_isolation_forest(&x, &IsofParams::default(), 3).unwrap();
        let max_inlier = s.raw_scores[..300].iter().copied().fold(f64::MIN, f64::max);
        assert!(s.raw_scores[300] > max_inlier);
        assert!(s.raw_scores.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn same_seed_same_scores() {
        let rows: Vec<[f64; 3]> = (0..200).map(|i| [i as f64, (i * i % 17) as f64, (i % 5) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let a = score_isolation_forest(&x, &IsofParams::default(), 11).unwrap();
        let b = score_isolation_forest(&x, &IsofParams::default(), 11).unwrap();
        assert_eq!(a.raw_scores, b.raw_scores);
    }

    #[test]
    fn constant_data_gives_leaf_only_trees() {
        let x = Matrix::from_rows(&vec![[1.0, 2.0]; 50]).unwrap();
        let s = score_isolation_forest(&x, &IsofParams::default(), 0).unwrap();
        let first = s.raw_scores[0];
        assert!(s.raw_scores.iter().all(|&v| v == first));
    }
}
