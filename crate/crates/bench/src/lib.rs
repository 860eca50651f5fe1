//! Shared inputs for the benchmarks.

use obs_core::features::build_feature_matrix;
use obs_core::market_data::generate_synthetic;
use obs_core::{FeatureMatrix, FeatureParams, LobRecord, SyntheticConfig};

pub fn records(n: usize, seed: u64) -> Vec<LobRecord> {
    let cfg = SyntheticConfig {
        n_records: n,
        seed,
        ..Default::default()
    };
    generate_synthetic(&cfg).expect("valid synthetic config").records
}

pub fn features(n: usize, seed: u64) -> FeatureMatrix {
    build_feature_matrix(&records(n, seed), &FeatureParams::default()).expect("feature matrix")
}
