//! From anomaly scores to flags and mean-reversion trade signals.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorSpec, ScoreVector};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats;

/// How flags are derived from scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Full-sample percentile of the normalized scores.
    Percentile,
    /// The detector's own labels.
    Native,
    /// Percentile over a trailing window of earlier scores only (experimental).
    Rolling,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::Percentile => "percentile",
            LabelMode::Native => "native",
            LabelMode::Rolling => "rolling",
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "percentile" => Ok(LabelMode::Percentile),
            "native" => Ok(LabelMode::Native),
            "rolling" => Ok(LabelMode::Rolling),
            _ => Err(Error::Config(format!(
                "unknown mode '{s}' (expected percentile, native or rolling)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: LabelMode,
    /// Threshold quantile as a fraction, e.g. 0.95.
    pub quantile: f64,
    /// Trailing window length for [`LabelMode::Rolling`].
    pub rolling_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: LabelMode::Percentile,
            quantile: 0.95,
            rolling_window: 1440,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::Config(format!(
                "percentile {} must lie in (0, 100]",
                self.quantile * 100.0
            )));
        }
        if self.mode == LabelMode::Rolling && self.rolling_window < 2 {
            return Err(Error::Config("rolling window must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Long => "long",
            Direction::Short => "short",
        }
    }

    /// Opposes the momentum; `None` when momentum is zero or undefined.
    pub fn against(momentum: f64) -> Option<Direction> {
        if momentum > 0.0 {
            Some(Direction::Short)
        } else if momentum < 0.0 {
            Some(Direction::Long)
        } else {
            None
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Direction::Long),
            "short" => Ok(Direction::Short),
            _ => Err(Error::Parameter(format!("unknown direction '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeSignal {
    pub ts: i64,
    pub direction: Direction,
    pub source_score: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub detector: DetectorSpec,
    pub normalized_scores: Vec<f64>,
    /// Negative infinity in native mode; the last trailing threshold in rolling mode.
    pub threshold: f64,
    pub flags: Vec<bool>,
    pub signals: Vec<TradeSignal>,
}

impl SignalSeries {
    pub fn flag_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// CSV with header `ts,direction,score,momentum`.
    pub fn write_signals_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ts", "direction", "score", "momentum"])?;
        for s in &self.signals {
            w.write_record([
                s.ts.to_string(),
                s.direction.to_string(),
                s.source_score.to_string(),
                s.momentum.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<signals csv>", e))?;
        Ok(())
    }
}

/// Min-max scaling onto `[0, 1]`.
pub fn normalize_scores(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: raw.len(),
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite anomaly score".into()));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::DegenerateScores);
    }
    let range = max - min;
    Ok(raw
        .iter()
        .map(|&v| ((v - min) / range).clamp(0.0, 1.0))
        .collect())
}

/// Linear-interpolation quantile, falling back to nearest rank (with a
/// warning) when there are too few scores to resolve `q`.
pub fn compute_threshold(scores: &[f64], q: f64) -> f64 {
    let sorted = stats::sorted_copy(scores);
    if q >= 1.0 {
        return sorted[sorted.len() - 1];
    }
    if (sorted.len() as f64) < 1.0 / (1.0 - q) {
        log::warn!(
            "{} scores cannot resolve quantile {q}; using nearest rank",
            sorted.len()
        );
        return stats::nearest_rank_sorted(&sorted, q);
    }
    stats::quantile_sorted(&sorted, q)
}

pub fn binarize(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// Flags from a trailing window of strictly earlier scores. Rows without a
/// full window are never flagged. Returns the flags and the last threshold.
pub fn rolling_flags(scores: &[f64], q: f64, window: usize) -> (Vec<bool>, f64) {
    let mut flags = vec![false; scores.len()];
    let mut last = f64::NAN;
    let mut sorted: Vec<f64> = Vec::with_capacity(window);
    for t in 0..scores.len() {
        if t >= window {
            last = stats::quantile_sorted(&sorted, q);
            flags[t] = scores[t] > last;
            let old = scores[t - window];
            let pos = sorted.partition_point(|v| v.total_cmp(&old).is_lt());
            sorted.remove(pos);
        }
        let pos = sorted.partition_point(|v| v.total_cmp(&scores[t]).is_lt());
        sorted.insert(pos, scores[t]);
    }
    (flags, last)
}

/// One signal per flagged row with nonzero momentum, opposing the momentum.
pub fn generate_signals(
    flags: &[bool],
    momentum: &[f64],
    timestamps: &[i64],
    scores: &[f64],
) -> Vec<TradeSignal> {
    flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .filter_map(|(i, _)| {
            Direction::against(momentum[i]).map(|direction| TradeSignal {
                ts: timestamps[i],
                direction,
                source_score: scores[i],
                momentum: momentum[i],
            })
        })
        .collect()
}

/// Normalizes, flags and turns one detector's scores into trade signals.
pub fn build_signal_series(
    sv: &ScoreVector,
    features: &FeatureMatrix,
    config: &PipelineConfig,
) -> Result<SignalSeries> {
    config.validate()?;
    if sv.len() != features.nrows() {
        return Err(Error::Parameter(format!(
            "{} scores for {} feature rows",
            sv.len(),
            features.nrows()
        )));
    }
    let normalized = normalize_scores(&sv.raw_scores)?;
    let (threshold, flags) = match config.mode {
        LabelMode::Percentile => {
            let t = compute_threshold(&normalized, config.quantile);
            (t, binarize(&normalized, t))
        }
        LabelMode::Native => {
            let labels = sv.native_labels.clone().ok_or_else(|| {
                Error::Parameter(format!("{} has no native labels", sv.kind().name()))
            })?;
            (f64::NEG_INFINITY, labels)
        }
        LabelMode::Rolling => {
            let (flags, t) = rolling_flags(&normalized, config.quantile, config.rolling_window);
            (t, flags)
        }
    };
    let signals = generate_signals(&flags, &features.momentum, &features.row_timestamps, &normalized);
    Ok(SignalSeries {
        detector: sv.spec,
        normalized_scores: normalized,
        threshold,
        flags,
        signals,
    })
}
