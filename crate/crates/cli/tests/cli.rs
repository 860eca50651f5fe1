use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn obs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obs"))
        .args(args)
        .env_remove("OBS_CONFIG")
        .output()
        .expect("spawn obs")
}

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--synthetic",
        "n=1200,seed=3",
        "--detectors",
        "EC,HBOS",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    obs(&args)
}

#[test]
fn run_writes_summary_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().nth(1).unwrap().starts_with("EC,"));
    assert!(dir.path().join("manifest.json").is_file());
    assert!(dir.path().join("per_detector/hbos/ledger.csv").is_file());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("HBOS"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_small(&a, &["--seed", "5"]).status.success());
    assert!(run_small(&b, &["--seed", "5"]).status.success());
    for f in ["summary.csv", "manifest.json", "per_detector/ec/scores.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_detector_is_a_usage_error() {
    let out = obs(&["run", "--synthetic", "n=500", "--detectors", "EC,FOO"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--detectors"), "{err}");
    assert!(err.contains("FOO"), "{err}");
}

#[test]
fn bad_fraction_reports_config_module() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), &["--fraction", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error module=config"), "{err}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("obs.toml");
    fs::write(&cfg, "seed = 8\n\n[backtest]\nbudget = 3000\n").unwrap();
    let out_dir = dir.path().join("run");
    let out = run_small(&out_dir, &["--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"), "{manifest}");
    assert!(manifest.contains("3000"), "{manifest}");
}

#[test]
fn compare_merges_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_small(&a, &["--seed", "1"]).status.success());
    assert!(obs(&[
        "run", "--synthetic", "n=1200,seed=4", "--detectors", "KNN", "--out", b.to_str().unwrap()
    ])
    .status
    .success());
    let cmp = dir.path().join("cmp");
    let out = obs(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--out", cmp.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn generate_writes_csv_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lob.csv");
    let labels = dir.path().join("labels.csv");
    let out = obs(&[
        "generate",
        "--synthetic",
        "n=300,seed=2",
        "--out",
        csv.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 301);
    let l = fs::read_to_string(&labels).unwrap();
    assert!(l.starts_with("ts,anomaly"));
    assert_eq!(l.lines().count(), 301);

    let run_dir = dir.path().join("run");
    let out = obs(&["run", "--input", csv.to_str().unwrap(), "--detectors", "EC", "--out", run_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
