mod common;

use std::collections::BTreeMap;
use std::fs;

use obs_core::report::{compare_runs, execute_run, read_summary};
use obs_core::{
    BacktestConfig, DetectorKind, FeatureParams, InputSpec, PipelineConfig, RunSettings,
    SyntheticConfig,
};

fn settings(kinds: &[DetectorKind], seed: u64) -> RunSettings {
    RunSettings {
        input: InputSpec::Synthetic {
            config: SyntheticConfig { n_records: 1500, seed, ..Default::default() },
        },
        seed,
        features: FeatureParams::default(),
        pipeline: PipelineConfig::default(),
        backtest: BacktestConfig::default(),
        detectors: RunSettings::detector_specs(kinds, &BTreeMap::new(), seed),
    }
}

#[test]
fn run_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let report = execute_run(&settings(&[DetectorKind::Ec, DetectorKind::Hbos], 1), dir.path()).unwrap();
    for f in ["manifest.json", "summary.csv", "benchmark.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert!(!dir.path().join("failures.csv").exists());
    for d in ["ec", "hbos"] {
        for f in ["scores.csv", "signals.csv", "ledger.csv", "equity.csv"] {
            assert!(dir.path().join("per_detector").join(d).join(f).is_file(), "{d}/{f} missing");
        }
    }
    let rows = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(rows, report.output.summary_rows());
    let scores = fs::read_to_string(dir.path().join("per_detector/ec/scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), report.output.features.nrows() + 1);
}

#[test]
fn manifest_records_input_hash_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    execute_run(&settings(&[DetectorKind::Knn], 9), dir.path()).unwrap();
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["input_records"], 1500);
    assert_eq!(m["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn comparison_ranks_by_gain_and_drops_duplicates() {
    let tmp = tempfile::tempdir().unwrap();
    let kinds = [DetectorKind::Ec, DetectorKind::Hbos, DetectorKind::Knn];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    execute_run(&settings(&kinds, 1), &a).unwrap();
    execute_run(&settings(&kinds, 2), &b).unwrap();
    // A copy of run `a` under another name contributes only duplicates.
    execute_run(&settings(&kinds, 1), &c).unwrap();
    let out = tmp.path().join("cmp");
    let cmp = compare_runs(&[a, b, c], &out).unwrap();
    assert_eq!(cmp.rows.len(), 6);
    assert_eq!(cmp.duplicates_dropped, 3);
    assert!(cmp.rows.windows(2).all(|w| w[0].row.gain_pct >= w[1].row.gain_pct));
    for f in ["comparison.csv", "equity_curves.csv", "profit_per_trade.csv", "fees.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let ranked = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(ranked.lines().count(), 7);
}

#[test]
fn file_input_matches_synthetic_input() {
    let tmp = tempfile::tempdir().unwrap();
    let s = settings(&[DetectorKind::Ec], 4);
    let InputSpec::Synthetic { config } = &s.input else { unreachable!() };
    let series = obs_core::market_data::generate_synthetic(config).unwrap();
    let csv = tmp.path().join("lob.csv");
    fs::write(&csv, obs_core::market_data::to_csv_string(&series.records).unwrap()).unwrap();

    let from_file = RunSettings {
        input: InputSpec::File { path: csv, levels: config.levels },
        ..s.clone()
    };
    let a = execute_run(&s, &tmp.path().join("syn")).unwrap();
    let b = execute_run(&from_file, &tmp.path().join("file")).unwrap();
    assert_eq!(a.output.summary_rows(), b.output.summary_rows());
    assert_eq!(a.input.sha256, b.input.sha256);
}
