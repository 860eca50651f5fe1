//! Run settings and the TOML configuration file.
//!
//! ```toml
//! seed = 7
//!
//! [input]
//! synthetic = "n=5000,seed=3"   # or: path = "book.csv", levels = 10
//!
//! [pipeline]
//! detectors = "EC,HBOS,LOF"
//! mode = "percentile"
//! percentile = 95
//! momentum_window = 5
//!
//! [backtest]
//! budget = 1500
//! fraction = 0.3333
//! fee_bps = 8
//! apply_fees = false
//! exit = "next_bar"
//!
//! [detectors.LOF]
//! k = 30
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestConfig, ExitRule};
use crate::detectors::{DetectorKind, DetectorParams, DetectorSpec};
use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::market_data::SyntheticConfig;
use crate::signal::{LabelMode, PipelineConfig};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_LEVELS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InputSpec {
    File { path: PathBuf, levels: usize },
    Synthetic { config: SyntheticConfig },
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub input: InputSpec,
    pub seed: u64,
    pub features: FeatureParams,
    pub pipeline: PipelineConfig,
    pub backtest: BacktestConfig,
    pub detectors: Vec<DetectorSpec>,
}

impl RunSettings {
    /// Default parameters for each kind, overridden where `overrides` has an entry.
    pub fn detector_specs(
        kinds: &[DetectorKind],
        overrides: &BTreeMap<DetectorKind, DetectorParams>,
        seed: u64,
    ) -> Vec<DetectorSpec> {
        let mut seen = Vec::new();
        kinds
            .iter()
            .filter(|k| {
                let fresh = !seen.contains(*k);
                seen.push(**k);
                fresh
            })
            .map(|&k| {
                let params = overrides
                    .get(&k)
                    .copied()
                    .unwrap_or_else(|| DetectorParams::default_for(k));
                DetectorSpec::new(params, seed)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.backtest.validate()?;
        if self.detectors.is_empty() {
            return Err(Error::Config("no detectors selected".into()));
        }
        for d in &self.detectors {
            d.params.validate()?;
        }
        if self.features.momentum_window == 0 {
            return Err(Error::Config("momentum window must be at least 1".into()));
        }
        if let InputSpec::Synthetic { config } = &self.input {
            config.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub path: Option<PathBuf>,
    pub synthetic: Option<String>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub detectors: Option<String>,
    pub mode: Option<LabelMode>,
    /// Percent, e.g. 95.
    pub percentile: Option<f64>,
    pub momentum_window: Option<usize>,
    pub rolling_window: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    pub budget: Option<f64>,
    pub fraction: Option<f64>,
    pub fee_bps: Option<f64>,
    pub apply_fees: Option<bool>,
    pub exit: Option<ExitRule>,
}

/// Contents of a configuration file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub detectors: BTreeMap<String, toml::Table>,
}

impl FileConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Typed per-detector parameter overrides from `[detectors.<KIND>]` tables.
    pub fn detector_overrides(&self) -> Result<BTreeMap<DetectorKind, DetectorParams>> {
        self.detectors
            .iter()
            .map(|(name, table)| {
                let kind: DetectorKind = name.parse()?;
                let params = DetectorParams::from_toml_table(kind, table.clone())
                    .map_err(|e| Error::Config(format!("[detectors.{name}]: {e}")))?;
                params.validate()?;
                Ok((kind, params))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let cfg = FileConfig::from_toml_str(
            r#"
            seed = 7
            [input]
            synthetic = "n=500"
            [pipeline]
            detectors = "EC,LOF"
            mode = "native"
            percentile = 97.5
            [backtest]
            fee_bps = 10
            exit = "next_signal"
            [detectors.LOF]
            k = 30
            [detectors.isof]
            n_trees = 50
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.pipeline.mode, Some(LabelMode::Native));
        assert_eq!(cfg.backtest.exit, Some(ExitRule::NextSignal));
        let o = cfg.detector_overrides().unwrap();
        match o[&DetectorKind::Lof] {
            DetectorParams::Lof(p) => assert_eq!((p.k, p.threshold), (30, 1.5)),
            ref other => panic!("{other:?}"),
        }
        assert!(o.contains_key(&DetectorKind::Isof));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::from_toml_str("[pipeline]\nmodee = \"native\"").is_err());
        let cfg = FileConfig::from_toml_str("[detectors.LOF]\nkk = 3").unwrap();
        assert!(cfg.detector_overrides().is_err());
        let cfg = FileConfig::from_toml_str("[detectors.NOPE]\nk = 3").unwrap();
        assert!(cfg.detector_overrides().is_err());
    }

    #[test]
    fn duplicate_kinds_collapse() {
        let specs = RunSettings::detector_specs(
            &[DetectorKind::Ec, DetectorKind::Lof, DetectorKind::Ec],
            &BTreeMap::new(),
            1,
        );
        assert_eq!(specs.len(), 2);
    }
}
