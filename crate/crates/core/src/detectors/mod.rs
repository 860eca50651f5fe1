//! Unsupervised outlier detectors over a feature matrix.
//!
//! Each detector has a typed entry point (`score_mcd`, `score_lof`, ...).
//! [`score`] dispatches on a [`DetectorSpec`] and makes every detector
//! equivariant under row permutations by fitting on a canonical row order.

mod clustering;
mod covariance;
mod density;
mod gaussian;
mod hbos;
mod isolation;
mod ocsvm;
mod proximity;
mod sod;
mod spec;

use rayon::prelude::*;

use crate::error::Result;
use crate::matrix::Matrix;
use crate::stats;

pub use clustering::{kmeans, large_clusters, score_cblof, score_kmeans, KMeansFit};
pub use covariance::{
    fast_mcd, score_elliptic_envelope, score_empirical_covariance, score_mcd, support_size, McdFit,
};
pub use density::{core_distances, fit_dbscan, fit_optics, score_dbscan, score_optics, DbscanFit, OpticsFit};
pub use hbos::score_hbos;
pub use isolation::{average_path_length, score_isolation_forest, IsolationForest};
pub use ocsvm::{default_gamma, fit_one_class, score_ocsvm, OneClassFit};
pub use proximity::{local_outlier_factor, score_knn, score_lof};
pub use sod::{score_sod, subspace_deviation};
pub use spec::*;

/// Strictly-greater-than labels.
pub fn labels_above(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// Score at the `1 - contamination` linear quantile.
pub fn quantile_threshold(scores: &[f64], contamination: f64) -> f64 {
    stats::quantile(scores, 1.0 - contamination)
}

/// Row indices sorted lexicographically by row contents, then by index.
pub fn canonical_order(x: &Matrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn dispatch(x: &Matrix, spec: &DetectorSpec) -> Result<ScoreVector> {
    spec.params.validate()?;
    let seed = spec.seed;
    let mut out = match &spec.params {
        DetectorParams::Ec(p) => score_empirical_covariance(x, p),
        DetectorParams::Mcd(p) => score_mcd(x, p, seed),
        DetectorParams::Ee(p) => score_elliptic_envelope(x, p, seed),
        DetectorParams::Hbos(p) => score_hbos(x, p),
        DetectorParams::Ocsvm(p) => score_ocsvm(x, p, seed),
        DetectorParams::Dbscan(p) => score_dbscan(x, p),
        DetectorParams::Optics(p) => score_optics(x, p),
        DetectorParams::Isof(p) => score_isolation_forest(x, p, seed),
        DetectorParams::Lof(p) => score_lof(x, p),
        DetectorParams::Cblof(p) => score_cblof(x, p, seed),
        DetectorParams::Kmeans(p) => score_kmeans(x, p, seed),
        DetectorParams::Knn(p) => score_knn(x, p),
        DetectorParams::Sod(p) => score_sod(x, p),
    }?;
    out.spec = *spec;
    Ok(out)
}

/// Scores `x` with one detector. Results do not depend on row order.
pub fn score(x: &Matrix, spec: &DetectorSpec) -> Result<ScoreVector> {
    let order = canonical_order(x);
    let xc = x.select_rows(&order);
    let mut sv = dispatch(&xc, spec)?;
    let unpermute = |v: &[f64]| {
        let mut out = vec![0.0; v.len()];
        for (k, &s) in v.iter().enumerate() {
            out[order[k]] = s;
        }
        out
    };
    sv.raw_scores = unpermute(&sv.raw_scores);
    sv.native_labels = sv.native_labels.map(|labels| {
        let mut out = vec![false; labels.len()];
        for (k, l) in labels.into_iter().enumerate() {
            out[order[k]] = l;
        }
        out
    });
    sv.metadata = sv.metadata.unpermute(&order);
    Ok(sv)
}

/// Runs every detector; a failure in one does not affect the others.
pub fn run_all_detectors(x: &Matrix, specs: &[DetectorSpec]) -> Vec<Result<ScoreVector>> {
    specs.par_iter().map(|s| score(x, s)).collect()
}
