use std::path::PathBuf;

use crate::market_data::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {violation}")]
    Validation { line: usize, violation: Violation },
    #[error("line {line}: duplicate timestamp {ts}")]
    DuplicateTimestamp { line: usize, ts: i64 },
    #[error("timestamps decrease at index {index}")]
    DecreasingTimestamps { index: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("imbalance undefined: both book sides are empty")]
    UndefinedImbalance,
    #[error("Amihud illiquidity undefined: zero traded volume")]
    UndefinedLiquidity,
    #[error("depth level {level} outside 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("non-positive price at index {index}")]
    NonPositivePrice { index: usize },
    #[error("every feature column is constant")]
    AllConstantFeatures,
    #[error("covariance matrix is singular even after ridge {ridge:e}")]
    SingularCovariance { ridge: f64 },
    #[error("{algorithm} did not converge within {iterations} iterations")]
    NonConvergence {
        algorithm: &'static str,
        iterations: usize,
    },
    #[error("scores are constant; min-max normalization is undefined")]
    DegenerateScores,
    #[error("{0}")]
    Backtest(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
