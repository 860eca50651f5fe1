//! Histogram-based outlier score.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::spec::{DetectorParams, DetectorSpec, FitMetadata, HbosParams, ScoreVector};
use super::{labels_above, quantile_threshold};

/// Static-width histogram over `[min, max]` of one column.
#[derive(Debug, Clone)]
pub(crate) struct Histogram {
    min: f64,
    width: f64,
    densities: Vec<f64>,
}

impl Histogram {
    fn fit(col: &[f64], bins: usize, floor: f64) -> Histogram {
        let n = col.len() as f64;
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // A constant column collapses to one unit-width bin of density 1.
        let (bins, width) = if max > min {
            (bins, (max - min) / bins as f64)
        } else {
            (1, 1.0)
        };
        let mut counts = vec![0usize; bins];
        let mut h = Histogram {
            min,
            width,
            densities: Vec::new(),
        };
        for &v in col {
            counts[h.bin(v, bins)] += 1;
        }
        h.densities = counts
            .iter()
            .map(|&c| ((c as f64 / n) / width).max(floor))
            .collect();
        h
    }

    fn bin(&self, v: f64, bins: usize) -> usize {
        let b = ((v - self.min) / self.width).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(bins - 1)
        }
    }

    fn density(&self, v: f64) -> f64 {
        self.densities[self.bin(v, self.densities.len())]
    }
}

/// `sum_j log(1 / density_j(x_j))` with per-column static histograms.
pub fn score_hbos(x: &Matrix, params: &HbosParams) -> Result<ScoreVector> {
    let start = Instant::now();
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let bins = params
        .bins
        .unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
        .max(1);
    let hists: Vec<Histogram> = (0..x.ncols())
        .map(|j| Histogram::fit(&x.column(j), bins, params.density_floor))
        .collect();
    let scores: Vec<f64> = x
        .rows()
        .map(|r| {
            r.iter()
                .zip(&hists)
                .map(|(&v, h)| (1.0 / h.density(v)).ln())
                .sum()
        })
        .collect();
    let threshold = params
        .threshold
        .unwrap_or_else(|| quantile_threshold(&scores, params.contamination));
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Hbos(*params), 0),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Histogram { bins, threshold },
        elapsed: start.elapsed(),
    })
}
