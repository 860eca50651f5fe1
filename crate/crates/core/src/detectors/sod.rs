//! Subspace outlier degree.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::neighbors::{by_dist_then_index, knn_graph, KnnGraph};

use super::spec::{DetectorParams, DetectorSpec, FitMetadata, ScoreVector, SodParams};
use super::{labels_above, quantile_threshold};

/// Rows whose neighbor lists contain each row.
fn reverse_neighbors(g: &KnnGraph) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); g.len()];
    for p in 0..g.len() {
        for &o in g.neighbors(p) {
            rev[o].push(p);
        }
    }
    rev
}

/// Reference set of `i`: the `size` rows sharing the most neighbors with it,
/// closer rows first on ties, then the nearest remaining rows if too few share any.
pub fn reference_set(x: &Matrix, g: &KnnGraph, rev: &[Vec<usize>], i: usize, size: usize) -> Vec<usize> {
    let mut shared = std::collections::HashMap::<usize, usize>::new();
    for &o in g.neighbors(i) {
        for &q in &rev[o] {
            if q != i {
                *shared.entry(q).or_default() += 1;
            }
        }
    }
    let xi = x.row(i);
    let mut cand: Vec<(usize, f64, usize)> = shared
        .into_iter()
        .map(|(q, s)| (s, sq_dist(xi, x.row(q)), q))
        .collect();
    cand.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut refs: Vec<usize> = cand.iter().take(size).map(|c| c.2).collect();
    if refs.len() < size {
        let mut rest: Vec<(f64, usize)> = (0..x.nrows())
            .filter(|&q| q != i && !refs.contains(&q))
            .map(|q| (sq_dist(xi, x.row(q)), q))
            .collect();
        rest.sort_by(by_dist_then_index);
        refs.extend(rest.iter().take(size - refs.len()).map(|e| e.1));
    }
    refs
}

/// Score of one row against its reference set, with the subspace dimensionality.
pub fn subspace_deviation(row: &[f64], x: &Matrix, refs: &[usize], alpha: f64) -> (f64, usize) {
    let p = row.len();
    let m = refs.len() as f64;
    let mut mean = vec![0.0; p];
    for &r in refs {
        for (acc, v) in mean.iter_mut().zip(x.row(r)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0; p];
    for &r in refs {
        for ((acc, v), mu) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    let limit = alpha * var.iter().sum::<f64>() / p as f64;
    let mut dims = 0;
    let mut ss = 0.0;
    for j in 0..p {
        if var[j] < limit {
            dims += 1;
            ss += (row[j] - mean[j]).powi(2);
        }
    }
    if dims == 0 {
        (0.0, 0)
    } else {
        (ss.sqrt() / (dims as f64).sqrt(), dims)
    }
}

pub fn score_sod(x: &Matrix, params: &SodParams) -> Result<ScoreVector> {
    let start = Instant::now();
    let n = x.nrows();
    if params.ref_size == 0 || params.ref_size >= n {
        return Err(Error::Parameter(format!(
            "reference-set size {} must satisfy 1 <= size < n = {n}",
            params.ref_size
        )));
    }
    let g = knn_graph(x, params.snn_k.min(n - 1))?;
    let rev = reverse_neighbors(&g);
    let out: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let refs = reference_set(x, &g, &rev, i, params.ref_size);
            subspace_deviation(x.row(i), x, &refs, params.alpha)
        })
        .collect();
    let scores: Vec<f64> = out.iter().map(|o| o.0).collect();
    let mean_dimensionality = out.iter().map(|o| o.1 as f64).sum::<f64>() / n as f64;
    let threshold = quantile_threshold(&scores, params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Sod(*params), 0),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Subspace {
            ref_size: params.ref_size,
            mean_dimensionality,
        },
        elapsed: start.elapsed(),
    })
}
