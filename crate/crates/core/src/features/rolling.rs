//! Trailing-window series measures. Output element `k` belongs to input
//! index `k + window`, so every value uses only data at or before its bar.

use crate::error::{Error, Result};

/// Gaps between consecutive timestamps (epoch ms) in seconds; length `n - 1`.
pub fn compute_inter_arrival(timestamps: &[i64]) -> Result<Vec<f64>> {
    if timestamps.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: timestamps.len(),
        });
    }
    timestamps
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if w[1] < w[0] {
                Err(Error::DecreasingTimestamps { index: i + 1 })
            } else {
                Ok((w[1] - w[0]) as f64 / 1000.0)
            }
        })
        .collect()
}

/// Rolling population std of the last `window` price differences.
pub fn immediate_volatility(closes: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(Error::Parameter(format!(
            "immediate-volatility window must be >= 2, got {window}"
        )));
    }
    if closes.len() < window + 1 {
        return Err(Error::InsufficientData {
            needed: window + 1,
            got: closes.len(),
        });
    }
    let diffs: Vec<f64> = closes.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(diffs
        .windows(window)
        .map(|win| {
            // Welford within the window.
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for (k, &x) in win.iter().enumerate() {
                let delta = x - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (x - mean);
            }
            (m2 / window as f64).max(0.0).sqrt()
        })
        .collect())
}

/// One-bar log returns; length `n - 1`.
pub fn log_returns(closes: &[f64]) -> Result<Vec<f64>> {
    if let Some(index) = closes.iter().position(|&c| !(c > 0.0)) {
        return Err(Error::NonPositivePrice { index });
    }
    Ok(closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Rolling `sqrt(sum r_i^2)` over the last `window` log returns.
pub fn realized_volatility(closes: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::Parameter("realized-volatility window must be >= 1".into()));
    }
    let rets = log_returns(closes)?;
    if rets.len() < window {
        return Err(Error::InsufficientData {
            needed: window + 1,
            got: closes.len(),
        });
    }
    Ok(rets
        .windows(window)
        .map(|w| w.iter().map(|r| r * r).sum::<f64>().sqrt())
        .collect())
}

/// `(c_t - c_{t-w}) / c_{t-w}`.
pub fn compute_momentum(closes: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::Parameter("momentum window must be >= 1".into()));
    }
    if closes.len() <= window {
        return Err(Error::InsufficientData {
            needed: window + 1,
            got: closes.len(),
        });
    }
    Ok((window..closes.len())
        .map(|t| (closes[t] - closes[t - window]) / closes[t - window])
        .collect())
}
