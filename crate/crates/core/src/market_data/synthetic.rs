//! Synthetic LOB series with labeled anomaly injection.
//!
//! The baseline is a geometric random walk on the close with lognormal
//! traded volume and lognormal per-level book sizes. Anomalies are assigned
//! per record (from index 1) by a single uniform draw against the
//! cumulative rates, so at most one kind lands on any record.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Fixed8;

use super::record::LobRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    VolumeSpike,
    VolumeDust,
    TimeGap,
    DepthWithdrawal,
    DepthInflation,
    VolatilityShock,
    AnomalousCalm,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 7] = [
        AnomalyKind::VolumeSpike,
        AnomalyKind::VolumeDust,
        AnomalyKind::TimeGap,
        AnomalyKind::DepthWithdrawal,
        AnomalyKind::DepthInflation,
        AnomalyKind::VolatilityShock,
        AnomalyKind::AnomalousCalm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::VolumeSpike => "volume_spike",
            AnomalyKind::VolumeDust => "volume_dust",
            AnomalyKind::TimeGap => "time_gap",
            AnomalyKind::DepthWithdrawal => "depth_withdrawal",
            AnomalyKind::DepthInflation => "depth_inflation",
            AnomalyKind::VolatilityShock => "volatility_shock",
            AnomalyKind::AnomalousCalm => "anomalous_calm",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown anomaly kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    /// Per-record injection probability.
    pub rate: f64,
    /// Multiplier; for `anomalous_calm` it is the run length in bars.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_records: usize,
    pub base_price: f64,
    /// Standard deviation of the per-bar log return.
    pub base_volatility: f64,
    pub seed: u64,
    pub levels: usize,
    pub start_ts: i64,
    pub interval_ms: i64,
    pub median_volume: f64,
    pub anomaly_specs: Vec<AnomalySpec>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        use AnomalyKind::*;
        let spec = |kind, rate, magnitude| AnomalySpec {
            kind,
            rate,
            magnitude,
        };
        SyntheticConfig {
            n_records: 26_204,
            base_price: 95_000.0,
            base_volatility: 0.001,
            seed: 42,
            levels: 10,
            // 2024-12-26T00:00:00Z
            start_ts: 1_735_171_200_000,
            interval_ms: 60_000,
            median_volume: 10.0,
            anomaly_specs: vec![
                spec(VolumeSpike, 0.01, 20.0),
                spec(VolumeDust, 0.004, 20.0),
                spec(TimeGap, 0.004, 5.0),
                spec(DepthWithdrawal, 0.004, 10.0),
                spec(DepthInflation, 0.004, 10.0),
                spec(VolatilityShock, 0.004, 8.0),
                spec(AnomalousCalm, 0.002, 5.0),
            ],
        }
    }
}

impl SyntheticConfig {
    /// A clean series: same baseline, no anomalies.
    pub fn clean(n_records: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_records,
            seed,
            anomaly_specs: Vec::new(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_records < 2 {
            return bad(format!("n_records must be >= 2, got {}", self.n_records));
        }
        if !(self.base_price > 0.0 && self.base_price.is_finite()) {
            return bad("base_price must be positive".into());
        }
        if !(self.base_volatility >= 0.0 && self.base_volatility.is_finite()) {
            return bad("base_volatility must be non-negative".into());
        }
        if self.levels == 0 {
            return bad("levels must be >= 1".into());
        }
        if self.interval_ms <= 0 {
            return bad("interval_ms must be positive".into());
        }
        if !(self.median_volume > 0.0) {
            return bad("median_volume must be positive".into());
        }
        let mut total = 0.0;
        for s in &self.anomaly_specs {
            if !(s.rate >= 0.0 && s.rate.is_finite()) {
                return bad(format!("{} rate must be non-negative", s.kind));
            }
            if !(s.magnitude > 0.0 && s.magnitude.is_finite()) {
                return bad(format!("{} magnitude must be positive", s.kind));
            }
            total += s.rate;
        }
        if total >= 0.5 {
            return bad(format!("anomaly rates sum to {total}, must be < 0.5"));
        }
        Ok(())
    }

    /// Parses `default` or a comma list of overrides applied to the defaults:
    /// `n=5000,seed=7,price=30000,vol=0.002,levels=5,volume_spike=0.02:20`.
    /// Naming any anomaly kind replaces the default anomaly mix; `clean`
    /// clears it.
    pub fn from_spec_str(spec: &str) -> Result<Self> {
        let mut cfg = SyntheticConfig::default();
        let spec = spec.trim();
        if spec.is_empty() || spec == "default" {
            return Ok(cfg);
        }
        let mut custom_anomalies: Option<Vec<AnomalySpec>> = None;
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "default" {
                continue;
            }
            if part == "clean" {
                custom_anomalies = Some(Vec::new());
                continue;
            }
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{part}`")))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{v}` for `{key}`")))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("bad integer `{v}` for `{key}`")))
            };
            match key {
                "n" | "n_records" => cfg.n_records = int(value)? as usize,
                "seed" => cfg.seed = int(value)?,
                "price" | "base_price" => cfg.base_price = num(value)?,
                "vol" | "base_volatility" => cfg.base_volatility = num(value)?,
                "levels" => cfg.levels = int(value)? as usize,
                "interval_ms" => cfg.interval_ms = int(value)? as i64,
                "median_volume" => cfg.median_volume = num(value)?,
                other => {
                    let kind: AnomalyKind = other.parse()?;
                    let (rate, magnitude) = value.split_once(':').ok_or_else(|| {
                        Error::Config(format!("anomaly `{other}` needs rate:magnitude"))
                    })?;
                    custom_anomalies.get_or_insert_with(Vec::new).push(AnomalySpec {
                        kind,
                        rate: num(rate)?,
                        magnitude: num(magnitude)?,
                    });
                }
            }
        }
        if let Some(a) = custom_anomalies {
            cfg.anomaly_specs = a;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generated records with their ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub records: Vec<LobRecord>,
    pub labels: Vec<bool>,
    pub anomaly_kinds: Vec<Option<AnomalyKind>>,
}

impl LabeledSeries {
    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

const TICK: f64 = 0.01;
const SPREAD_FRACTION: f64 = 0.000_05;
const LEVEL_GAP_FRACTION: f64 = 0.000_02;
const MEDIAN_LEVEL_SIZE: f64 = 0.5;
const VOLUME_DISPERSION: f64 = 0.3;
const SIZE_DISPERSION: f64 = 0.6;
const SPREAD_DISPERSION: f64 = 0.25;

fn tick_round(x: f64) -> Fixed8 {
    Fixed8::from_f64((x / TICK).round() * TICK)
}

fn quantity(x: f64) -> Fixed8 {
    Fixed8::from_f64(x).max(Fixed8::from_units(1))
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<LabeledSeries> {
    config.validate()?;
    let n = config.n_records;
    let levels = config.levels;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut kinds: Vec<Option<AnomalyKind>> = vec![None; n];
    for slot in kinds.iter_mut().skip(1) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for spec in &config.anomaly_specs {
            acc += spec.rate;
            if u < acc {
                *slot = Some(spec.kind);
                break;
            }
        }
    }
    let magnitude = |kind: AnomalyKind| {
        config
            .anomaly_specs
            .iter()
            .find(|s| s.kind == kind)
            .map_or(1.0, |s| s.magnitude)
    };

    // Calm runs extend forward over unassigned records.
    let mut calm = vec![false; n];
    let starts: Vec<usize> = (0..n)
        .filter(|&i| kinds[i] == Some(AnomalyKind::AnomalousCalm))
        .collect();
    let run = magnitude(AnomalyKind::AnomalousCalm).round().max(1.0) as usize;
    for i in starts {
        for j in i..(i + run).min(n) {
            if j == i || kinds[j].is_none() {
                kinds[j] = Some(AnomalyKind::AnomalousCalm);
                calm[j] = true;
            }
        }
    }

    let sigma = config.base_volatility;
    let vol_mu = config.median_volume.ln();
    let size_mu = MEDIAN_LEVEL_SIZE.ln();

    let mut records = Vec::with_capacity(n);
    let mut prev_close = tick_round(config.base_price);
    let mut ts = config.start_ts;
    for i in 0..n {
        let z_ret: f64 = rng.sample(StandardNormal);
        let z_hi: f64 = rng.sample(StandardNormal);
        let z_lo: f64 = rng.sample(StandardNormal);
        let z_vol: f64 = rng.sample(StandardNormal);
        let z_spread: f64 = rng.sample(StandardNormal);
        let z_sizes: Vec<f64> = (0..2 * levels).map(|_| rng.sample(StandardNormal)).collect();
        let kind = kinds[i];

        if i > 0 {
            let gap = if kind == Some(AnomalyKind::TimeGap) {
                (config.interval_ms as f64 * magnitude(AnomalyKind::TimeGap)).round() as i64
            } else {
                config.interval_ms
            };
            ts += gap.max(1);
        }

        let open = prev_close;
        let mut ret = if i == 0 { 0.0 } else { sigma * z_ret };
        if kind == Some(AnomalyKind::VolatilityShock) {
            ret *= magnitude(AnomalyKind::VolatilityShock);
        }
        let (close, high, low) = if calm[i] {
            (open, open, open)
        } else {
            let close = tick_round(open.to_f64() * ret.exp()).max(Fixed8::from_f64(TICK));
            let top = open.max(close).to_f64();
            let bottom = open.min(close).to_f64();
            let high = tick_round(top * (1.0 + 0.5 * sigma * z_hi.abs())).max(open.max(close));
            let low = tick_round(bottom * (1.0 - 0.5 * sigma * z_lo.abs()))
                .min(open.min(close))
                .max(Fixed8::from_f64(TICK));
            (close, high, low)
        };

        let mut volume = (vol_mu + VOLUME_DISPERSION * z_vol).exp();
        match kind {
            Some(AnomalyKind::VolumeSpike) => volume *= magnitude(AnomalyKind::VolumeSpike),
            Some(AnomalyKind::VolumeDust) => volume /= magnitude(AnomalyKind::VolumeDust),
            _ => {}
        }

        let mid = close.to_f64();
        let spread = (mid * SPREAD_FRACTION * (SPREAD_DISPERSION * z_spread).exp()).max(TICK);
        let best_bid = tick_round(mid - spread / 2.0);
        let best_ask = tick_round(mid + spread / 2.0).max(Fixed8::from_units(
            best_bid.units() + Fixed8::from_f64(TICK).units(),
        ));
        let gap = tick_round((mid * LEVEL_GAP_FRACTION).max(TICK)).max(Fixed8::from_f64(TICK));
        let size_scale = match kind {
            Some(AnomalyKind::DepthWithdrawal) => 1.0 / magnitude(AnomalyKind::DepthWithdrawal),
            Some(AnomalyKind::DepthInflation) => magnitude(AnomalyKind::DepthInflation),
            _ => 1.0,
        };
        let mut bid_px = Vec::with_capacity(levels);
        let mut ask_px = Vec::with_capacity(levels);
        let mut bid_sz = Vec::with_capacity(levels);
        let mut ask_sz = Vec::with_capacity(levels);
        for l in 0..levels {
            let offset = gap.units() * l as i64;
            bid_px.push(Fixed8::from_units(best_bid.units() - offset));
            ask_px.push(Fixed8::from_units(best_ask.units() + offset));
            bid_sz.push(quantity(
                (size_mu + SIZE_DISPERSION * z_sizes[2 * l]).exp() * size_scale,
            ));
            ask_sz.push(quantity(
                (size_mu + SIZE_DISPERSION * z_sizes[2 * l + 1]).exp() * size_scale,
            ));
        }
        if bid_px.last().is_some_and(|p| !p.is_positive()) {
            return Err(Error::Config(
                "base price too low for the configured book depth".into(),
            ));
        }

        records.push(LobRecord {
            ts,
            open,
            high,
            low,
            close,
            volume: quantity(volume),
            bid_px,
            bid_sz,
            ask_px,
            ask_sz,
        });
        prev_close = close;
    }

    let labels = kinds.iter().map(Option::is_some).collect();
    Ok(LabeledSeries {
        records,
        labels,
        anomaly_kinds: kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{to_csv_string, validate_series};

    fn small(n: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_records: n,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_rates_mean_no_labels() {
        let s = generate_synthetic(&SyntheticConfig::clean(500, 3)).unwrap();
        assert!(s.labels.iter().all(|l| !l));
        assert!(validate_series(&s.records).is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic(&small(800, 11)).unwrap();
        let b = generate_synthetic(&small(800, 11)).unwrap();
        assert_eq!(to_csv_string(&a.records).unwrap(), to_csv_string(&b.records).unwrap());
        assert_eq!(a.labels, b.labels);
        let c = generate_synthetic(&small(800, 12)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn default_mix_is_clean_and_strictly_increasing() {
        let s = generate_synthetic(&small(3000, 5)).unwrap();
        assert!(validate_series(&s.records).is_empty());
        assert!(s.records.windows(2).all(|w| w[1].ts > w[0].ts));
        assert_eq!(s.labels.len(), s.records.len());
        assert!(s.anomaly_count() > 0);
    }

    #[test]
    fn time_gap_widens_interval() {
        let cfg = SyntheticConfig::from_spec_str("n=2000,seed=9,time_gap=0.05:4").unwrap();
        let s = generate_synthetic(&cfg).unwrap();
        for i in 1..s.records.len() {
            let dt = s.records[i].ts - s.records[i - 1].ts;
            if s.labels[i] {
                assert_eq!(dt, 240_000);
            } else {
                assert_eq!(dt, 60_000);
            }
        }
    }

    #[test]
    fn calm_runs_are_flat() {
        let cfg = SyntheticConfig::from_spec_str("n=2000,seed=9,anomalous_calm=0.01:3").unwrap();
        let s = generate_synthetic(&cfg).unwrap();
        assert!(s.anomaly_count() > 0);
        for (r, k) in s.records.iter().zip(&s.anomaly_kinds) {
            if k.is_some() {
                assert_eq!(r.high, r.low);
                assert_eq!(r.open, r.close);
            }
        }
    }

    #[test]
    fn calm_runs_do_not_chain() {
        let cfg = SyntheticConfig::from_spec_str("n=5000,seed=4,anomalous_calm=0.01:3").unwrap();
        let s = generate_synthetic(&cfg).unwrap();
        let mut longest = 0;
        let mut cur = 0;
        for &l in &s.labels {
            cur = if l { cur + 1 } else { 0 };
            longest = longest.max(cur);
        }
        assert!(longest <= 9, "longest calm stretch {longest}");
        let share = s.anomaly_count() as f64 / 5000.0;
        assert!(share < 0.05, "calm share {share}");
    }

    #[test]
    fn depth_withdrawal_shrinks_book() {
        let cfg = SyntheticConfig::from_spec_str("n=4000,seed=2,depth_withdrawal=0.05:10").unwrap();
        let s = generate_synthetic(&cfg).unwrap();
        let depth = |r: &LobRecord| r.bid_sz.iter().map(|q| q.to_f64()).sum::<f64>();
        let (mut flagged, mut clean) = (vec![], vec![]);
        for (r, &l) in s.records.iter().zip(&s.labels) {
            if l { flagged.push(depth(r)) } else { clean.push(depth(r)) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&flagged) * 5.0 < mean(&clean));
    }

    #[test]
    fn spec_string_parsing() {
        let c = SyntheticConfig::from_spec_str("n=100,seed=7,volume_spike=0.02:20").unwrap();
        assert_eq!(c.n_records, 100);
        assert_eq!(c.seed, 7);
        assert_eq!(c.anomaly_specs.len(), 1);
        assert_eq!(SyntheticConfig::from_spec_str("default").unwrap(), SyntheticConfig::default());
        assert!(SyntheticConfig::from_spec_str("clean").unwrap().anomaly_specs.is_empty());
        assert!(SyntheticConfig::from_spec_str("n=1").is_err());
        assert!(SyntheticConfig::from_spec_str("volume_spike=0.3:2,volume_dust=0.3:2").is_err());
        assert!(SyntheticConfig::from_spec_str("bogus=1").is_err());
        assert!(SyntheticConfig::from_spec_str("volume_spike=0.1:0").is_err());
    }
}
