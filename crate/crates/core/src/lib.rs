//! Outlier detection on limit-order-book bars, mean-reversion signals and
//! a fixed-fractional backtester.

pub mod backtest;
pub mod config;
pub mod detectors;
pub mod error;
pub mod features;
pub mod fixed;
pub mod market_data;
pub mod matrix;
pub mod neighbors;
pub mod report;
pub mod rng;
pub mod signal;
pub mod stats;

pub use backtest::{BacktestConfig, BacktestResult, ExitRule, TradeLedgerEntry};
pub use config::{FileConfig, InputSpec, RunSettings};
pub use detectors::{DetectorKind, DetectorParams, DetectorSpec, ScoreVector};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureParams};
pub use fixed::Fixed8;
pub use market_data::{LobRecord, SyntheticConfig};
pub use matrix::Matrix;
pub use report::{PipelineError, RunManifest};
pub use signal::{Direction, LabelMode, PipelineConfig, SignalSeries, TradeSignal};
