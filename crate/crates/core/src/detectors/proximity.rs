//! Nearest-neighbor detectors: k-th neighbor distance and local outlier factor.

use std::time::Instant;

use crate::error::Result;
use crate::matrix::Matrix;
use crate::neighbors::{knn_graph, KnnGraph};

use super::spec::{DetectorParams, DetectorSpec, FitMetadata, KnnParams, LofParams, ScoreVector};
use super::{labels_above, quantile_threshold};

pub fn score_knn(x: &Matrix, params: &KnnParams) -> Result<ScoreVector> {
    let start = Instant::now();
    let g = knn_graph(x, params.k)?;
    let scores: Vec<f64> = (0..x.nrows()).map(|i| g.kth_distance(i)).collect();
    let threshold = quantile_threshold(&scores, params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Knn(*params), 0),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Neighbors {
            k: params.k,
            threshold,
        },
        elapsed: start.elapsed(),
    })
}

/// Local outlier factor from a precomputed neighbor graph.
pub fn local_outlier_factor(g: &KnnGraph) -> Vec<f64> {
    let n = g.len();
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = g
                .neighbors(i)
                .iter()
                .zip(g.distances(i))
                .map(|(&o, &d)| d.max(g.kth_distance(o)))
                .sum();
            1.0 / (reach / g.k as f64 + 1e-10)
        })
        .collect();
    (0..n)
        .map(|i| {
            let s: f64 = g.neighbors(i).iter().map(|&o| lrd[o]).sum();
            s / g.k as f64 / lrd[i]
        })
        .collect()
}

pub fn score_lof(x: &Matrix, params: &LofParams) -> Result<ScoreVector> {
    let start = Instant::now();
    let g = knn_graph(x, params.k)?;
    let scores = local_outlier_factor(&g);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Lof(*params), 0),
        native_labels: Some(labels_above(&scores, params.threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Neighbors {
            k: params.k,
            threshold: params.threshold,
        },
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dist;

    fn sample() -> Matrix {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let t = i as f64;
                [(t * 0.61).sin() * (1.0 + (i % 3) as f64), (t * 1.37).cos()]
            })
            .chain(std::iter::once([6.0, -4.0]))
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    /// Textbook LOF computed from full distance lists.
    fn naive_lof(x: &Matrix, k: usize) -> Vec<f64> {
        let n = x.nrows();
        let nbrs: Vec<Vec<(f64, usize)>> = (0..n)
            .map(|i| {
                let mut v: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (dist(x.row(i), x.row(j)), j))
                    .collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                v.truncate(k);
                v
            })
            .collect();
        let kdist: Vec<f64> = nbrs.iter().map(|v| v[k - 1].0).collect();
        let lrd: Vec<f64> = (0..n)
            .map(|i| {
                let m = nbrs[i].iter().map(|&(d, o)| d.max(kdist[o])).sum::<f64>() / k as f64;
                1.0 / (m + 1e-10)
            })
            .collect();
        (0..n)
            .map(|i| nbrs[i].iter().map(|&(_, o)| lrd[o]).sum::<f64>() / k as f64 / lrd[i])
            .collect()
    }

    #[test]
    fn lof_matches_naive_definition() {
        let x = sample();
        for k in [1, 3, 7, 20] {
            let got = local_outlier_factor(&knn_graph(&x, k).unwrap());
            let want = naive_lof(&x, k);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn lof_near_one_on_uniform_grid_interior() {
        let rows: Vec<[f64; 2]> = (0..144).map(|i| [(i % 12) as f64, (i / 12) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let lof = local_outlier_factor(&knn_graph(&x, 4).unwrap());
        // Row 5 + 12 * 5 is far from the border.
        assert!((lof[65] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn knn_score_is_kth_distance() {
        let x = sample();
        let s = score_knn(&x, &KnnParams::default()).unwrap();
        for i in 0..x.nrows() {
            let mut d: Vec<f64> = (0..x.nrows()).filter(|&j| j != i).map(|j| dist(x.row(i), x.row(j))).collect();
            d.sort_by(f64::total_cmp);
            assert_eq!(s.raw_scores[i], d[4]);
        }
        let top = s.raw_scores.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(s.raw_scores[40], top);
    }
}
