//! K-Means and cluster-based local outlier factor.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dist, sq_dist, Matrix};
use crate::rng::stream_rng;

use super::spec::{CblofParams, DetectorParams, DetectorSpec, FitMetadata, KmeansParams, ScoreVector};
use super::{labels_above, quantile_threshold};

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Sum of squared distances after each assignment step; the last entry
    /// belongs to the returned centroids and assignment.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn distance_to_own(&self, x: &Matrix) -> Vec<f64> {
        x.rows()
            .zip(&self.assignment)
            .map(|(r, &c)| dist(r, &self.centroids[c]))
            .collect()
    }
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(row, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(x: &Matrix, centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    (0..x.nrows())
        .into_par_iter()
        .map(|i| nearest(x.row(i), centroids))
        .collect()
}

/// Random first centroid, then repeatedly the row farthest from every chosen centroid.
fn farthest_point_init(x: &Matrix, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let first = stream_rng(seed, 0).random_range(0..n);
    let mut centroids = vec![x.row(first).to_vec()];
    let mut min_d: Vec<f64> = x.rows().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for i in 1..n {
            if min_d[i] > min_d[far] {
                far = i;
            }
        }
        let c = x.row(far).to_vec();
        for (i, r) in x.rows().enumerate() {
            min_d[i] = min_d[i].min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

pub fn kmeans(x: &Matrix, k: usize, tol: f64, max_iter: usize, seed: u64) -> Result<KMeansFit> {
    let (n, p) = (x.nrows(), x.ncols());
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must be in [1, {n}]")));
    }
    let mut centroids = farthest_point_init(x, k, seed);
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let assigned = assign(x, &centroids);
        history.push(assigned.iter().map(|&(_, d)| d).sum());
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                algorithm: "k-means",
                iterations,
            });
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (r, &(c, _)) in x.rows().zip(&assigned) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        let mut updated = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] > 0 {
                updated.push(sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<f64>>());
            } else {
                // Reseed an empty cluster with the worst-fitted row not already used.
                let mut far = usize::MAX;
                for i in 0..n {
                    if !taken[i] && (far == usize::MAX || assigned[i].1 > assigned[far].1) {
                        far = i;
                    }
                }
                taken[far] = true;
                updated.push(x.row(far).to_vec());
            }
        }
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        centroids = updated;
        if shift <= tol {
            break;
        }
    }
    let assigned = assign(x, &centroids);
    history.push(assigned.iter().map(|&(_, d)| d).sum());
    let assignment: Vec<usize> = assigned.iter().map(|&(c, _)| c).collect();
    let mut sizes = vec![0; k];
    for &c in &assignment {
        sizes[c] += 1;
    }
    Ok(KMeansFit {
        centroids,
        assignment,
        sizes,
        objective_history: history,
        iterations,
    })
}

pub fn score_kmeans(x: &Matrix, params: &KmeansParams, seed: u64) -> Result<ScoreVector> {
    let start = Instant::now();
    let fit = kmeans(x, params.k, params.tol, params.max_iter, seed)?;
    let scores = fit.distance_to_own(x);
    let threshold = quantile_threshold(&scores, params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Kmeans(*params), seed),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Clustering {
            centroids: fit.centroids,
            assignment: fit.assignment,
            sizes: fit.sizes,
            objective_history: fit.objective_history,
            large: None,
        },
        elapsed: start.elapsed(),
    })
}

/// Marks clusters as large: sorted by size, the first `b` clusters that
/// either cover `alpha * n` rows or are followed by a size drop of `beta`.
pub fn large_clusters(sizes: &[usize], alpha: f64, beta: f64) -> Vec<bool> {
    let n: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut cumulative = 0;
    let mut b = order.len();
    for (pos, &c) in order.iter().enumerate() {
        cumulative += sizes[c];
        let covers = cumulative as f64 >= alpha * n as f64;
        let drop = order
            .get(pos + 1)
            .is_some_and(|&next| sizes[next] == 0 || sizes[c] as f64 / sizes[next] as f64 >= beta);
        if covers || drop {
            b = pos + 1;
            break;
        }
    }
    let mut large = vec![false; sizes.len()];
    for &c in &order[..b] {
        large[c] = true;
    }
    large
}

pub fn score_cblof(x: &Matrix, params: &CblofParams, seed: u64) -> Result<ScoreVector> {
    let start = Instant::now();
    let fit = kmeans(x, params.k, params.tol, params.max_iter, seed)?;
    let large = large_clusters(&fit.sizes, params.alpha, params.beta);
    let scores: Vec<f64> = x
        .rows()
        .zip(&fit.assignment)
        .map(|(r, &c)| {
            let d = if large[c] {
                dist(r, &fit.centroids[c])
            } else {
                fit.centroids
                    .iter()
                    .zip(&large)
                    .filter(|(_, &l)| l)
                    .map(|(m, _)| dist(r, m))
                    .fold(f64::INFINITY, f64::min)
            };
            if params.weighted {
                d * fit.sizes[c] as f64
            } else {
                d
            }
        })
        .collect();
    let threshold = quantile_threshold(&scores, params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Cblof(*params), seed),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Clustering {
            centroids: fit.centroids,
            assignment: fit.assignment,
            sizes: fit.sizes,
            objective_history: fit.objective_history,
            large: Some(large),
        },
        elapsed: start.elapsed(),
    })
}
