//! Density-based detectors: DBSCAN and OPTICS.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dist, Matrix};
use crate::neighbors::knn_graph;
use crate::stats;

use super::labels_above;
use super::spec::{DbscanParams, DetectorParams, DetectorSpec, FitMetadata, OpticsParams, ScoreVector};

fn resolve_min_pts(min_pts: Option<usize>, x: &Matrix) -> Result<usize> {
    let m = min_pts.unwrap_or(2 * x.ncols()).max(2);
    if m > x.nrows() {
        return Err(Error::InsufficientData {
            needed: m,
            got: x.nrows(),
        });
    }
    Ok(m)
}

/// Distance to the `(min_pts - 1)`-th nearest other row, so that a row is
/// core at radius `eps` exactly when its core distance is at most `eps`.
pub fn core_distances(x: &Matrix, min_pts: usize) -> Result<Vec<f64>> {
    let g = knn_graph(x, min_pts - 1)?;
    Ok((0..x.nrows()).map(|i| g.kth_distance(i)).collect())
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone)]
pub struct DbscanFit {
    pub eps: f64,
    pub min_pts: usize,
    pub core: Vec<bool>,
    /// Cluster id per row, `-1` for noise. Ids follow the lowest core index.
    pub clusters: Vec<i64>,
    /// 0 for core rows, otherwise the distance to the nearest core row.
    pub scores: Vec<f64>,
}

pub fn fit_dbscan(x: &Matrix, params: &DbscanParams) -> Result<DbscanFit> {
    let n = x.nrows();
    let min_pts = resolve_min_pts(params.min_pts, x)?;
    let core_dist = core_distances(x, min_pts)?;
    let eps = match params.eps {
        Some(e) => e,
        None => stats::quantile(&core_dist, params.eps_percentile / 100.0),
    };
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be finite and non-negative")));
    }
    let core: Vec<bool> = core_dist.iter().map(|&d| d <= eps).collect();
    let core_ix: Vec<usize> = (0..n).filter(|&i| core[i]).collect();
    if core_ix.is_empty() {
        return Err(Error::Parameter(format!(
            "no core points at eps = {eps}, min_pts = {min_pts}"
        )));
    }

    let edges: Vec<Vec<usize>> = core_ix
        .par_iter()
        .map(|&i| {
            core_ix
                .iter()
                .copied()
                .take_while(|&j| j < i)
                .filter(|&j| dist(x.row(i), x.row(j)) <= eps)
                .collect()
        })
        .collect();
    let mut sets = DisjointSet::new(n);
    for (&i, adj) in core_ix.iter().zip(&edges) {
        for &j in adj {
            sets.union(i, j);
        }
    }

    let nearest: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if core[i] {
                return (0.0, i);
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for &j in &core_ix {
                let d = dist(x.row(i), x.row(j));
                if d < best.0 {
                    best = (d, j);
                }
            }
            best
        })
        .collect();

    let mut ids = vec![-1i64; n];
    let mut next = 0i64;
    let mut root_id = std::collections::HashMap::new();
    for &i in &core_ix {
        let r = sets.find(i);
        let id = *root_id.entry(r).or_insert_with(|| {
            next += 1;
            next - 1
        });
        ids[i] = id;
    }
    let clusters: Vec<i64> = (0..n)
        .map(|i| {
            let (d, j) = nearest[i];
            if core[i] {
                ids[i]
            } else if d <= eps {
                ids[j]
            } else {
                -1
            }
        })
        .collect();
    Ok(DbscanFit {
        eps,
        min_pts,
        core,
        clusters,
        scores: nearest.iter().map(|&(d, _)| d).collect(),
    })
}

pub fn score_dbscan(x: &Matrix, params: &DbscanParams) -> Result<ScoreVector> {
    let start = Instant::now();
    let fit = fit_dbscan(x, params)?;
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Dbscan(*params), 0),
        native_labels: Some(fit.clusters.iter().map(|&c| c < 0).collect()),
        raw_scores: fit.scores,
        metadata: FitMetadata::Dbscan {
            eps: fit.eps,
            min_pts: fit.min_pts,
            core: fit.core,
            clusters: fit.clusters,
        },
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct OpticsFit {
    pub min_pts: usize,
    pub ordering: Vec<usize>,
    /// `None` where no predecessor defines the reachability.
    pub reachability: Vec<Option<f64>>,
    pub core_distance: Vec<f64>,
}

impl OpticsFit {
    /// Reachability with undefined entries replaced by 1.5x the largest defined one.
    pub fn scores(&self) -> Vec<f64> {
        let max = self
            .reachability
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max);
        self.reachability
            .iter()
            .map(|r| r.unwrap_or(1.5 * max))
            .collect()
    }
}

/// OPTICS with an unbounded radius. The walk starts from the row with the
/// largest core distance and always expands the unprocessed row with the
/// smallest reachability (lowest index on ties).
pub fn fit_optics(x: &Matrix, params: &OpticsParams) -> Result<OpticsFit> {
    let n = x.nrows();
    let min_pts = resolve_min_pts(params.min_pts, x)?;
    let core_distance = core_distances(x, min_pts)?;
    let mut start = 0;
    for (i, &c) in core_distance.iter().enumerate() {
        if c > core_distance[start] {
            start = i;
        }
    }
    let mut reach = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut current = start;
    loop {
        done[current] = true;
        ordering.push(current);
        let cd = core_distance[current];
        let xc = x.row(current);
        let mut next = usize::MAX;
        let mut best = f64::INFINITY;
        for o in 0..n {
            if done[o] {
                continue;
            }
            let r = cd.max(dist(xc, x.row(o)));
            if r < reach[o] {
                reach[o] = r;
            }
            if reach[o] < best || next == usize::MAX {
                best = reach[o];
                next = o;
            }
        }
        if next == usize::MAX {
            break;
        }
        current = next;
    }
    Ok(OpticsFit {
        min_pts,
        ordering,
        reachability: reach
            .into_iter()
            .map(|r| r.is_finite().then_some(r))
            .collect(),
        core_distance,
    })
}

pub fn score_optics(x: &Matrix, params: &OpticsParams) -> Result<ScoreVector> {
    let start = Instant::now();
    let fit = fit_optics(x, params)?;
    let scores = fit.scores();
    let threshold = stats::quantile(&scores, params.label_quantile);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Optics(*params), 0),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Optics {
            min_pts: fit.min_pts,
            ordering: fit.ordering,
            reachability: fit.reachability,
            core_distance: fit.core_distance,
        },
        elapsed: start.elapsed(),
    })
}
