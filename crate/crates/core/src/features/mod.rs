//! Microstructure features and the standardized detector input matrix.

mod matrix;
mod micro;
mod rolling;

pub use matrix::{
    build_feature_matrix, compute_feature_vectors, ExcludedRow, FeatureMatrix, FeatureParams,
    FeatureVector, FEATURE_NAMES,
};
pub use micro::{amihud_illiquidity, compute_depth, compute_imbalance, compute_spread};
pub use rolling::{
    compute_inter_arrival, compute_momentum, immediate_volatility, log_returns,
    realized_volatility,
};
