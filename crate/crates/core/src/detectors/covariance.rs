//! Empirical covariance, FAST-MCD and the reweighted elliptic envelope.

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;
use crate::stats;

use super::gaussian::{moments, Gaussian};
use super::spec::{DetectorParams, DetectorSpec, EcParams, FitMetadata, McdParams, ScoreVector};
use super::labels_above;

pub(crate) fn chi2_quantile(dof: usize, q: f64) -> f64 {
    if q >= 1.0 {
        return f64::INFINITY;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(q)
}

fn require_rows(x: &Matrix, min: usize) -> Result<()> {
    if x.nrows() < min {
        return Err(Error::InsufficientData {
            needed: min,
            got: x.nrows(),
        });
    }
    if x.ncols() == 0 {
        return Err(Error::Parameter("matrix has no columns".into()));
    }
    Ok(())
}

/// Squared Mahalanobis distance from the sample mean under the sample
/// covariance.
pub fn score_empirical_covariance(x: &Matrix, params: &EcParams) -> Result<ScoreVector> {
    let start = Instant::now();
    require_rows(x, 2)?;
    let fit = Gaussian::fit(x, None)?;
    let scores = fit.mahalanobis_sq_all(x);
    let threshold = stats::quantile(&scores, params.percentile / 100.0);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Ec(*params), 0),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Gaussian {
            location: fit.location,
            covariance: fit.covariance,
            ridge: fit.ridge,
            support: None,
            raw_determinant: None,
            consistency_factor: 1.0,
            threshold,
        },
        elapsed: start.elapsed(),
    })
}

/// Subset size `h` for a contamination fraction.
pub fn support_size(n: usize, params: &McdParams) -> usize {
    params
        .support_size
        .unwrap_or_else(|| ((n as f64) * (1.0 - params.contamination) + 1e-9).floor() as usize)
}

/// Raw minimum-covariance-determinant solution.
#[derive(Debug, Clone)]
pub struct McdFit {
    /// Sorted row indices of the best `h`-subset.
    pub support: Vec<usize>,
    pub location: Vec<f64>,
    pub covariance: Vec<f64>,
    pub determinant: f64,
}

fn smallest_h(d2: &[f64], h: usize, order: &mut Vec<usize>) -> Vec<usize> {
    order.clear();
    order.extend(0..d2.len());
    if h < d2.len() {
        order.select_nth_unstable_by(h - 1, |&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
    }
    let mut subset = order[..h].to_vec();
    subset.sort_unstable();
    subset
}

fn c_step(x: &Matrix, fit: &Gaussian, h: usize, order: &mut Vec<usize>) -> Result<(Vec<usize>, Gaussian)> {
    let d2 = fit.mahalanobis_sq_all(x);
    let subset = smallest_h(&d2, h, order);
    let next = Gaussian::fit(x, Some(&subset))?;
    Ok((subset, next))
}

/// FAST-MCD search: random `(p+1)`-subsets, two C-steps each, then the best
/// candidates iterated to convergence.
pub fn fast_mcd(x: &Matrix, params: &McdParams, seed: u64) -> Result<McdFit> {
    let n = x.nrows();
    let p = x.ncols();
    require_rows(x, p + 2)?;
    let h = support_size(n, params);
    if h <= p || h > n {
        return Err(Error::Parameter(format!(
            "MCD support size h = {h} must satisfy p < h <= n (p = {p}, n = {n})"
        )));
    }

    let starts: Vec<Result<(f64, usize, Vec<usize>)>> = (0..params.n_starts)
        .into_par_iter()
        .map_init(Vec::new, |order, s| {
            let mut rng = stream_rng(seed, s as u64);
            let mut subset: Vec<usize> = sample(&mut rng, n, p + 1).into_vec();
            let mut fit = loop {
                subset.sort_unstable();
                if let Some(g) = Gaussian::fit_strict(x, &subset) {
                    break g;
                }
                if subset.len() >= n {
                    break Gaussian::fit(x, Some(&subset))?;
                }
                loop {
                    let extra = rng.random_range(0..n);
                    if subset.binary_search(&extra).is_err() {
                        subset.push(extra);
                        break;
                    }
                }
            };
            for _ in 0..2 {
                let (s2, f2) = c_step(x, &fit, h, order)?;
                subset = s2;
                fit = f2;
            }
            Ok((fit.determinant(), s, subset))
        })
        .collect();
    let mut candidates = starts.into_iter().collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.dedup_by(|a, b| a.2 == b.2);
    candidates.truncate(params.n_best);

    let refined: Vec<Result<(f64, Vec<usize>, Gaussian)>> = candidates
        .into_par_iter()
        .map(|(_, _, subset)| {
            let mut order = Vec::new();
            let mut fit = Gaussian::fit(x, Some(&subset))?;
            let mut subset = subset;
            let mut det = fit.determinant();
            for _ in 0..params.max_csteps {
                let (s2, f2) = c_step(x, &fit, h, &mut order)?;
                let d2 = f2.determinant();
                let same = s2 == subset;
                let rel = (det - d2).abs() / det.abs().max(f64::MIN_POSITIVE);
                subset = s2;
                fit = f2;
                det = d2;
                if same || rel < params.tol {
                    return Ok((det, subset, fit));
                }
            }
            Err(Error::NonConvergence {
                algorithm: "MCD C-steps",
                iterations: params.max_csteps,
            })
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>, Gaussian)> = None;
    for r in refined {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (determinant, support, fit) = best.expect("at least one start");
    Ok(McdFit {
        support,
        location: fit.location,
        covariance: fit.covariance,
        determinant,
    })
}

/// Scales `fit` so the median squared distance matches the chi-squared
/// median; returns (corrected distances, factor).
fn consistency_corrected(x: &Matrix, fit: &Gaussian) -> (Vec<f64>, f64) {
    let d2 = fit.mahalanobis_sq_all(x);
    let med = stats::quantile(&d2, 0.5);
    let target = chi2_quantile(fit.p, 0.5);
    let factor = if med > 0.0 { med / target } else { 1.0 };
    let scaled = d2.iter().map(|d| d / factor).collect();
    (scaled, factor)
}

fn scaled_cov(cov: &[f64], factor: f64) -> Vec<f64> {
    cov.iter().map(|c| c * factor).collect()
}

/// Robust squared Mahalanobis distance under the consistency-corrected MCD
/// estimate. Native labels use the chi-squared `1 - alpha` quantile.
pub fn score_mcd(x: &Matrix, params: &McdParams, seed: u64) -> Result<ScoreVector> {
    let start = Instant::now();
    let mcd = fast_mcd(x, params, seed)?;
    let raw = Gaussian::from_moments(mcd.location.clone(), mcd.covariance.clone())?;
    let (scores, factor) = consistency_corrected(x, &raw);
    let threshold = chi2_quantile(x.ncols(), 1.0 - params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Mcd(*params), seed),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Gaussian {
            location: raw.location,
            covariance: scaled_cov(&raw.covariance, factor),
            ridge: raw.ridge,
            support: Some(mcd.support),
            raw_determinant: Some(mcd.determinant),
            consistency_factor: factor,
            threshold,
        },
        elapsed: start.elapsed(),
    })
}

/// MCD followed by one reweighting step: rows whose robust distance is within
/// the `reweight_quantile` chi-squared bound re-estimate location and
/// scatter, which are then consistency-corrected the same way.
pub fn score_elliptic_envelope(x: &Matrix, params: &McdParams, seed: u64) -> Result<ScoreVector> {
    let start = Instant::now();
    let mcd = fast_mcd(x, params, seed)?;
    let raw = Gaussian::from_moments(mcd.location.clone(), mcd.covariance.clone())?;
    let (robust, _) = consistency_corrected(x, &raw);
    let bound = chi2_quantile(x.ncols(), params.reweight_quantile);
    let mask: Vec<usize> = (0..x.nrows()).filter(|&i| robust[i] <= bound).collect();
    if mask.len() <= x.ncols() {
        return Err(Error::InsufficientData {
            needed: x.ncols() + 1,
            got: mask.len(),
        });
    }
    let (location, covariance) = moments(x, Some(&mask));
    let reweighted = Gaussian::from_moments(location, covariance)?;
    let (scores, factor) = consistency_corrected(x, &reweighted);
    let threshold = chi2_quantile(x.ncols(), 1.0 - params.contamination);
    Ok(ScoreVector {
        spec: DetectorSpec::new(DetectorParams::Ee(*params), seed),
        native_labels: Some(labels_above(&scores, threshold)),
        raw_scores: scores,
        metadata: FitMetadata::Gaussian {
            location: reweighted.location,
            covariance: scaled_cov(&reweighted.covariance, factor),
            ridge: reweighted.ridge,
            support: Some(mask),
            raw_determinant: Some(mcd.determinant),
            consistency_factor: factor,
            threshold,
        },
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_quantiles() {
        assert!((chi2_quantile(2, 0.5) - 1.386294361).abs() < 1e-8);
        assert!((chi2_quantile(1, 0.95) - 3.841458821).abs() < 1e-8);
        assert_eq!(chi2_quantile(3, 1.0), f64::INFINITY);
    }

    #[test]
    fn score_zero_at_mean() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 0.0], [2.0, 1.0], [2.0, 4.0], [2.0, -2.0]]).unwrap();
        let s = score_empirical_covariance(&x, &EcParams::default()).unwrap();
        assert!(s.raw_scores[2].abs() < 1e-15);
    }

    #[test]
    fn support_size_rule() {
        let p = McdParams::default();
        assert_eq!(support_size(100, &p), 95);
        assert_eq!(support_size(30, &McdParams { contamination: 1.0 / 6.0, ..p }), 25);
        assert_eq!(support_size(30, &McdParams { support_size: Some(20), ..p }), 20);
    }

    #[test]
    fn bad_support_size() {
        let x = Matrix::from_rows(&(0..10).map(|i| [i as f64, (i * i) as f64]).collect::<Vec<_>>()).unwrap();
        let p = McdParams { support_size: Some(2), ..Default::default() };
        assert!(matches!(fast_mcd(&x, &p, 1), Err(Error::Parameter(_))));
    }
}
