//! End-to-end runs and their on-disk reports.
//!
//! A run directory holds `manifest.json`, `summary.csv`, `benchmark.csv`
//! and `per_detector/<kind>/{scores,signals,ledger,equity}.csv`.
//! Detectors that fail are listed in `failures.csv` instead.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{daily_closes, run_backtest, BacktestConfig, BacktestResult};
use crate::config::{InputSpec, RunSettings};
use crate::detectors::{run_all_detectors, DetectorSpec, ScoreVector};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureMatrix, FeatureParams};
use crate::market_data::{generate_synthetic, read_csv, to_csv_string, LobRecord};
use crate::signal::{build_signal_series, PipelineConfig, SignalSeries};

pub const SUMMARY_HEADER: [&str; 8] = [
    "model",
    "long_trades",
    "short_trades",
    "cum_profit",
    "gain_pct",
    "win_rate",
    "total_fees",
    "profit_per_trade",
];

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct PipelineError {
    pub module: &'static str,
    pub source: Error,
}

impl PipelineError {
    pub fn new(module: &'static str, source: Error) -> Self {
        PipelineError { module, source }
    }

    /// `error module=<stage> detail="<message>"` on one line.
    pub fn line(&self) -> String {
        let detail = self
            .source
            .to_string()
            .replace('\\', "\\\\")
            .replace('"', "\\\"")
            .replace(['\n', '\r'], " ");
        format!("error module={} detail=\"{}\"", self.module, detail)
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn stage(module: &'static str) -> impl FnOnce(Error) -> PipelineError {
    move |e| PipelineError::new(module, e)
}

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub input: InputSpec,
    pub input_records: usize,
    /// SHA-256 of the input CSV bytes (of the generated CSV for synthetic input).
    pub input_sha256: String,
    pub seed: u64,
    pub features: FeatureParams,
    pub pipeline: PipelineConfig,
    pub backtest: BacktestConfig,
    pub detectors: Vec<DetectorSpec>,
}

impl RunManifest {
    pub fn new(settings: &RunSettings, input: &LoadedInput) -> Self {
        RunManifest {
            tool: "obs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input: settings.input.clone(),
            input_records: input.records.len(),
            input_sha256: input.sha256.clone(),
            seed: settings.seed,
            features: settings.features,
            pipeline: settings.pipeline,
            backtest: settings.backtest,
            detectors: settings.detectors.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub records: Vec<LobRecord>,
    pub sha256: String,
    /// Injected-anomaly ground truth for synthetic input.
    pub labels: Option<Vec<bool>>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_input(input: &InputSpec) -> Result<LoadedInput, PipelineError> {
    match input {
        InputSpec::File { path, levels } => {
            let bytes = fs::read(path)
                .map_err(|e| Error::io(path, e))
                .map_err(stage("market_data"))?;
            let records = read_csv(&bytes[..], *levels).map_err(stage("market_data"))?;
            Ok(LoadedInput {
                records,
                sha256: sha256_hex(&bytes),
                labels: None,
            })
        }
        InputSpec::Synthetic { config } => {
            let series = generate_synthetic(config).map_err(stage("market_data"))?;
            let csv = to_csv_string(&series.records).map_err(stage("market_data"))?;
            Ok(LoadedInput {
                sha256: sha256_hex(csv.as_bytes()),
                records: series.records,
                labels: Some(series.labels),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub scores: ScoreVector,
    pub signals: SignalSeries,
    pub backtest: BacktestResult,
}

#[derive(Debug)]
pub struct DetectorOutcome {
    pub spec: DetectorSpec,
    pub result: Result<DetectorRun, PipelineError>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub features: FeatureMatrix,
    pub outcomes: Vec<DetectorOutcome>,
    /// Last close of each UTC day with the buy-and-hold budget after it.
    pub benchmark: Vec<(i64, f64, f64)>,
}

impl RunOutput {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok())
            .map(|r| SummaryRow::from_backtest(r.scores.kind().name(), &r.backtest))
            .collect()
    }

    pub fn failures(&self) -> Vec<(&DetectorSpec, &PipelineError)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (&o.spec, e)))
            .collect()
    }
}

/// Simple-sum buy-and-hold budget at the end of each UTC day.
pub fn benchmark_curve(records: &[LobRecord], initial_budget: f64) -> Vec<(i64, f64, f64)> {
    let ts: Vec<i64> = records.iter().map(|r| r.ts).collect();
    let closes: Vec<f64> = records.iter().map(|r| r.close.to_f64()).collect();
    let daily = daily_closes(&ts, &closes);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(daily.len());
    for (k, &(day, close)) in daily.iter().enumerate() {
        if k > 0 {
            sum += close / daily[k - 1].1 - 1.0;
        }
        out.push((day * 86_400_000, close, initial_budget * (1.0 + sum)));
    }
    out
}

/// Features, every detector, signals and backtests. Detector failures are
/// kept per detector; only shared stages abort the run.
pub fn run_pipeline(records: &[LobRecord], settings: &RunSettings) -> Result<RunOutput, PipelineError> {
    settings.validate().map_err(stage("config"))?;
    let features =
        build_feature_matrix(records, &settings.features).map_err(stage("features"))?;
    let ts: Vec<i64> = records.iter().map(|r| r.ts).collect();
    let closes: Vec<f64> = records.iter().map(|r| r.close.to_f64()).collect();

    let scored = run_all_detectors(&features.values, &settings.detectors);
    let outcomes: Vec<DetectorOutcome> = scored
        .into_par_iter()
        .zip(settings.detectors.par_iter())
        .map(|(sv, spec)| {
            let result = sv.map_err(stage("detectors")).and_then(|scores| {
                let signals = build_signal_series(&scores, &features, &settings.pipeline)
                    .map_err(stage("signal_pipeline"))?;
                let backtest = run_backtest(&signals.signals, &ts, &closes, &settings.backtest)
                    .map_err(stage("backtester"))?;
                Ok(DetectorRun {
                    scores,
                    signals,
                    backtest,
                })
            });
            DetectorOutcome {
                spec: *spec,
                result,
            }
        })
        .collect();
    Ok(RunOutput {
        benchmark: benchmark_curve(records, settings.backtest.initial_budget),
        features,
        outcomes,
    })
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub long_trades: usize,
    pub short_trades: usize,
    pub cum_profit: f64,
    pub gain_pct: f64,
    pub win_rate: Option<f64>,
    pub total_fees: f64,
    pub profit_per_trade: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SummaryRow {
    pub fn from_backtest(model: &str, r: &BacktestResult) -> Self {
        SummaryRow {
            model: model.to_string(),
            long_trades: r.long_count,
            short_trades: r.short_count,
            cum_profit: r.cumulative_profit,
            gain_pct: r.gain_pct,
            win_rate: r.win_rate,
            total_fees: r.total_fees,
            profit_per_trade: r.profit_per_trade,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            self.long_trades.to_string(),
            self.short_trades.to_string(),
            self.cum_profit.to_string(),
            self.gain_pct.to_string(),
            opt(self.win_rate),
            self.total_fees.to_string(),
            opt(self.profit_per_trade),
        ]
    }

    pub fn from_fields(rec: &csv::StringRecord) -> Result<Self> {
        let bad = |what: &str| Error::Parse {
            line: rec.position().map_or(0, |p| p.line() as usize),
            message: format!("bad {what} in summary row"),
        };
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(bad("field count"));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(SUMMARY_HEADER[i]));
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(SUMMARY_HEADER[i]));
        let maybe = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        Ok(SummaryRow {
            model: rec[0].to_string(),
            long_trades: int(1)?,
            short_trades: int(2)?,
            cum_profit: num(3)?,
            gain_pct: num(4)?,
            win_rate: maybe(5)?,
            total_fees: num(6)?,
            profit_per_trade: maybe(7)?,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_rows<W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    write_rows(writer, &SUMMARY_HEADER, rows.iter().map(SummaryRow::fields))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("{}: unexpected summary header", path.display()),
        });
    }
    r.records()
        .map(|rec| SummaryRow::from_fields(&rec?))
        .collect()
}

fn write_scores<W: Write>(writer: W, run: &DetectorRun, features: &FeatureMatrix) -> Result<()> {
    let native = run.scores.native_labels.as_ref();
    write_rows(
        writer,
        &["ts", "raw_score", "normalized_score", "flag", "native_label"],
        (0..run.scores.len()).map(|i| {
            vec![
                features.row_timestamps[i].to_string(),
                run.scores.raw_scores[i].to_string(),
                run.signals.normalized_scores[i].to_string(),
                u8::from(run.signals.flags[i]).to_string(),
                native.map_or(String::new(), |l| u8::from(l[i]).to_string()),
            ]
        }),
    )
}

/// Writes every artifact of a run into `dir` (created if missing).
pub fn write_run(dir: &Path, manifest: &RunManifest, output: &RunOutput) -> Result<(), PipelineError> {
    let inner = || -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let mut f = create(&manifest_path)?;
        serde_json::to_writer_pretty(&mut f, manifest)?;
        f.write_all(b"\n").map_err(|e| Error::io(&manifest_path, e))?;
        f.flush().map_err(|e| Error::io(&manifest_path, e))?;

        write_summary(create(&dir.join("summary.csv"))?, &output.summary_rows())?;
        write_rows(
            create(&dir.join("benchmark.csv"))?,
            &["ts", "close", "budget"],
            output
                .benchmark
                .iter()
                .map(|(t, c, b)| vec![t.to_string(), c.to_string(), b.to_string()]),
        )?;

        let failures = output.failures();
        let failures_path = dir.join("failures.csv");
        if failures.is_empty() {
            if failures_path.exists() {
                fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
            }
        } else {
            write_rows(
                create(&failures_path)?,
                &["model", "module", "detail"],
                failures.iter().map(|(spec, e)| {
                    vec![
                        spec.kind().name().to_string(),
                        e.module.to_string(),
                        e.source.to_string(),
                    ]
                }),
            )?;
        }

        for outcome in &output.outcomes {
            let Ok(run) = &outcome.result else { continue };
            let sub = dir
                .join("per_detector")
                .join(outcome.spec.kind().name().to_ascii_lowercase());
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            write_scores(create(&sub.join("scores.csv"))?, run, &output.features)?;
            run.signals.write_signals_csv(create(&sub.join("signals.csv"))?)?;
            run.backtest.write_ledger_csv(create(&sub.join("ledger.csv"))?)?;
            run.backtest.write_equity_csv(create(&sub.join("equity.csv"))?)?;
        }
        Ok(())
    };
    inner().map_err(stage("cli_report"))
}

#[derive(Debug)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub output: RunOutput,
    pub input: LoadedInput,
}

/// Loads the input, runs the pipeline and writes the run directory.
pub fn execute_run(settings: &RunSettings, out_dir: &Path) -> Result<RunReport, PipelineError> {
    settings.validate().map_err(stage("config"))?;
    let input = load_input(&settings.input)?;
    let manifest = RunManifest::new(settings, &input);
    let output = run_pipeline(&input.records, settings)?;
    write_run(out_dir, &manifest, &output)?;
    Ok(RunReport {
        manifest,
        output,
        input,
    })
}

/// One ranked row of a comparison across run directories.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparedRow {
    pub run: String,
    pub row: SummaryRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Sorted by gain % (descending), then model and run.
    pub rows: Vec<ComparedRow>,
    pub duplicates_dropped: usize,
}

pub const COMPARISON_HEADER: [&str; 10] = [
    "rank",
    "run",
    "model",
    "long_trades",
    "short_trades",
    "cum_profit",
    "gain_pct",
    "win_rate",
    "total_fees",
    "profit_per_trade",
];

/// Merges the summaries of several run directories and writes the ranking
/// plus plot data (`comparison.csv`, `equity_curves.csv`,
/// `profit_per_trade.csv`, `fees.csv`) into `out_dir`.
pub fn compare_runs(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Comparison, PipelineError> {
    let inner = || -> Result<Comparison> {
        if run_dirs.is_empty() {
            return Err(Error::Config("compare needs at least one run directory".into()));
        }
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        let mut duplicates = 0;
        let mut curves = Vec::new();
        for dir in run_dirs {
            if !dir.join("manifest.json").is_file() {
                return Err(Error::Config(format!(
                    "{} is not a run directory (manifest.json missing)",
                    dir.display()
                )));
            }
            let run = dir.display().to_string();
            for row in read_summary(&dir.join("summary.csv"))? {
                if !seen.insert(row.fields()) {
                    duplicates += 1;
                    continue;
                }
                let equity = dir
                    .join("per_detector")
                    .join(row.model.to_ascii_lowercase())
                    .join("equity.csv");
                let mut r = csv::Reader::from_path(&equity)?;
                if r.headers()?.iter().ne(["ts", "budget"]) {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("{}: unexpected equity header", equity.display()),
                    });
                }
                for rec in r.records() {
                    let rec = rec?;
                    curves.push(vec![run.clone(), row.model.clone(), rec[0].to_string(), rec[1].to_string()]);
                }
                rows.push(ComparedRow {
                    run: run.clone(),
                    row,
                });
            }
        }
        if duplicates > 0 {
            log::warn!("dropped {duplicates} duplicate summary rows");
        }
        rows.sort_by(|a, b| {
            b.row
                .gain_pct
                .total_cmp(&a.row.gain_pct)
                .then_with(|| a.row.model.cmp(&b.row.model))
                .then_with(|| a.run.cmp(&b.run))
        });

        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        write_rows(
            create(&out_dir.join("comparison.csv"))?,
            &COMPARISON_HEADER,
            rows.iter().enumerate().map(|(i, r)| {
                let mut f = vec![(i + 1).to_string(), r.run.clone()];
                f.extend(r.row.fields());
                f
            }),
        )?;
        write_rows(create(&out_dir.join("equity_curves.csv"))?, &["run", "model", "ts", "budget"], curves)?;
        write_rows(
            create(&out_dir.join("profit_per_trade.csv"))?,
            &["run", "model", "profit_per_trade"],
            rows.iter()
                .map(|r| vec![r.run.clone(), r.row.model.clone(), opt(r.row.profit_per_trade)]),
        )?;
        write_rows(
            create(&out_dir.join("fees.csv"))?,
            &["run", "model", "total_fees"],
            rows.iter()
                .map(|r| vec![r.run.clone(), r.row.model.clone(), r.row.total_fees.to_string()]),
        )?;
        Ok(Comparison {
            rows,
            duplicates_dropped: duplicates,
        })
    };
    inner().map_err(stage("cli_report"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_line_is_single_line_and_quoted() {
        let e = PipelineError::new("market_data", Error::Config("bad \"x\"\nnext".into()));
        let line = e.line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error module=market_data detail=\""));
        assert!(line.contains("\\\"x\\\""));
    }

    #[test]
    fn summary_row_round_trips() {
        let row = SummaryRow {
            model: "EC".into(),
            long_trades: 3,
            short_trades: 4,
            cum_profit: 1.25,
            gain_pct: 0.08333333333333333,
            win_rate: None,
            total_fees: 0.1,
            profit_per_trade: Some(0.17857142857142858),
        };
        let mut buf = Vec::new();
        write_summary(&mut buf, std::slice::from_ref(&row)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, &buf).unwrap();
        assert_eq!(read_summary(&p).unwrap(), vec![row]);
    }

    #[test]
    fn benchmark_curve_ends_at_buy_and_hold() {
        use crate::market_data::{SyntheticConfig};
        let s = generate_synthetic(&SyntheticConfig::clean(3000, 5)).unwrap();
        let curve = benchmark_curve(&s.records, 1500.0);
        let ts: Vec<i64> = s.records.iter().map(|r| r.ts).collect();
        let px: Vec<f64> = s.records.iter().map(|r| r.close.to_f64()).collect();
        let bh = crate::backtest::buy_and_hold(&ts, &px, 1500.0).unwrap();
        assert!((curve.last().unwrap().2 - 1500.0 - bh).abs() < 1e-9);
    }
}
