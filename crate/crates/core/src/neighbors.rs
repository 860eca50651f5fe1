//! Exact brute-force nearest-neighbor search.
//!
//! Distances are Euclidean; ties are broken by the lower row index.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// The `k` nearest other rows of every row, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl KnnGraph {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Distance to the `k`-th nearest other row.
    pub fn kth_distance(&self, i: usize) -> f64 {
        self.distances[(i + 1) * self.k - 1]
    }

    pub fn len(&self) -> usize {
        self.distances.len() / self.k.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

#[inline]
pub(crate) fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub fn knn_graph(x: &Matrix, k: usize) -> Result<KnnGraph> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "neighbor count k = {k} must satisfy 1 <= k < n = {n}"
        )));
    }
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf: &mut Vec<(f64, usize)>, i| {
                buf.clear();
                let xi = x.row(i);
                for j in 0..n {
                    if j != i {
                        buf.push((sq_dist(xi, x.row(j)), j));
                    }
                }
                buf.select_nth_unstable_by(k - 1, by_dist_then_index);
                let head = &mut buf[..k];
                head.sort_unstable_by(by_dist_then_index);
                (
                    head.iter().map(|e| e.1).collect(),
                    head.iter().map(|e| e.0.sqrt()).collect(),
                )
            },
        )
        .collect();
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for (ix, ds) in rows {
        indices.extend(ix);
        distances.extend(ds);
    }
    Ok(KnnGraph {
        k,
        indices,
        distances,
    })
}
