use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use obs_core::backtest::{BacktestConfig, ExitRule};
use obs_core::config::{FileConfig, InputSpec, RunSettings, DEFAULT_LEVELS, DEFAULT_SEED};
use obs_core::detectors::{parse_detector_list, DetectorKind};
use obs_core::error::Error;
use obs_core::features::FeatureParams;
use obs_core::market_data::{generate_synthetic, write_csv, SyntheticConfig};
use obs_core::report::{compare_runs, execute_run, PipelineError, SummaryRow, SUMMARY_HEADER};
use obs_core::signal::{LabelMode, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "obs", version, about = "Order-book outlier detection and mean-reversion backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run detectors, signals and backtests; write a run directory.
    Run(RunArgs),
    /// Rank the detectors of one or more run directories.
    Compare(CompareArgs),
    /// Write a synthetic order-book CSV (and optionally its ground truth).
    Generate(GenerateArgs),
}

#[derive(Debug, Clone)]
struct DetectorList(Vec<DetectorKind>);

fn detector_list(s: &str) -> Result<DetectorList, String> {
    parse_detector_list(s).map(DetectorList).map_err(|e| e.to_string())
}

fn exit_rule(s: &str) -> Result<ExitRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn label_mode(s: &str) -> Result<LabelMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Order-book CSV file.
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic series: `default`, `clean`, or overrides like `n=5000,seed=7,volume_spike=0.02:20`.
    #[arg(long, value_name = "SPEC")]
    synthetic: Option<String>,
    /// Book levels per side in the input CSV [default: 10].
    #[arg(long, value_name = "N")]
    levels: Option<usize>,
    /// Comma-separated detector names or `all` [default: all].
    #[arg(long, value_name = "LIST", value_parser = detector_list)]
    detectors: Option<DetectorList>,
    /// Flagging mode: percentile, native or rolling [default: percentile].
    #[arg(long, value_name = "MODE", value_parser = label_mode)]
    mode: Option<LabelMode>,
    /// Score percentile used as the flag threshold [default: 95].
    #[arg(long, value_name = "Q")]
    percentile: Option<f64>,
    /// Momentum look-back in bars [default: 5].
    #[arg(long, value_name = "N")]
    momentum_window: Option<usize>,
    /// Initial budget [default: 1500].
    #[arg(long, value_name = "X")]
    budget: Option<f64>,
    /// Fraction of the current budget committed per trade [default: 0.3333].
    #[arg(long, value_name = "F")]
    fraction: Option<f64>,
    /// Fee in basis points of trade notional [default: 8].
    #[arg(long, value_name = "N")]
    fee_bps: Option<f64>,
    /// Deduct fees from the budget (fees are always reported).
    #[arg(long)]
    apply_fees: bool,
    /// Exit rule: next_bar or next_signal [default: next_bar].
    #[arg(long, value_name = "RULE", value_parser = exit_rule)]
    exit: Option<ExitRule>,
    /// Seed for the stochastic detectors [default: 42].
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "obs-run")]
    out: PathBuf,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, value_name = "FILE", env = "OBS_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Run directories written by `obs run`.
    #[arg(required = true, value_name = "RUN_DIR")]
    runs: Vec<PathBuf>,
    /// Directory for the comparison table and plot data.
    #[arg(long, value_name = "DIR", default_value = "obs-compare")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Synthetic series specification (see `run --synthetic`).
    #[arg(long, value_name = "SPEC", default_value = "default")]
    synthetic: String,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Also write `ts,anomaly` ground truth here.
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
}

fn config_error(e: Error) -> PipelineError {
    PipelineError::new("config", e)
}

fn resolve(args: &RunArgs) -> Result<RunSettings, PipelineError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p).map_err(config_error)?,
        None => FileConfig::default(),
    };
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);

    let input = if let Some(path) = &args.input {
        InputSpec::File {
            path: path.clone(),
            levels: args.levels.or(file.input.levels).unwrap_or(DEFAULT_LEVELS),
        }
    } else if let Some(spec) = args.synthetic.as_ref().or(file.input.synthetic.as_ref()) {
        InputSpec::Synthetic {
            config: SyntheticConfig::from_spec_str(spec).map_err(config_error)?,
        }
    } else if let Some(path) = &file.input.path {
        InputSpec::File {
            path: path.clone(),
            levels: args.levels.or(file.input.levels).unwrap_or(DEFAULT_LEVELS),
        }
    } else {
        return Err(config_error(Error::Config(
            "no input: pass --input PATH or --synthetic SPEC".into(),
        )));
    };

    let kinds = match (&args.detectors, &file.pipeline.detectors) {
        (Some(list), _) => list.0.clone(),
        (None, Some(s)) => parse_detector_list(s).map_err(config_error)?,
        (None, None) => DetectorKind::ALL.to_vec(),
    };
    let overrides: BTreeMap<_, _> = file.detector_overrides().map_err(config_error)?;

    let pipeline_defaults = PipelineConfig::default();
    let percentile = args
        .percentile
        .or(file.pipeline.percentile)
        .unwrap_or(pipeline_defaults.quantile * 100.0);
    let pipeline = PipelineConfig {
        mode: args.mode.or(file.pipeline.mode).unwrap_or(pipeline_defaults.mode),
        quantile: percentile / 100.0,
        rolling_window: file
            .pipeline
            .rolling_window
            .unwrap_or(pipeline_defaults.rolling_window),
    };
    let features = FeatureParams {
        momentum_window: args
            .momentum_window
            .or(file.pipeline.momentum_window)
            .unwrap_or(FeatureParams::default().momentum_window),
        ..FeatureParams::default()
    };

    let bt = BacktestConfig::default();
    let backtest = BacktestConfig {
        initial_budget: args.budget.or(file.backtest.budget).unwrap_or(bt.initial_budget),
        fraction: args.fraction.or(file.backtest.fraction).unwrap_or(bt.fraction),
        fee_rate: args
            .fee_bps
            .or(file.backtest.fee_bps)
            .map_or(bt.fee_rate, |b| b / 10_000.0),
        apply_fees: args.apply_fees || file.backtest.apply_fees.unwrap_or(bt.apply_fees),
        exit_rule: args.exit.or(file.backtest.exit).unwrap_or(bt.exit_rule),
    };

    let settings = RunSettings {
        input,
        seed,
        features,
        pipeline,
        backtest,
        detectors: RunSettings::detector_specs(&kinds, &overrides, seed),
    };
    settings.validate().map_err(config_error)?;
    Ok(settings)
}

fn print_table(rows: &[Vec<String>], header: &[&str]) -> io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, f) in widths.iter_mut().zip(r) {
            *w = (*w).max(f.len());
        }
    }
    let out = io::stdout();
    let mut out = out.lock();
    let line = |fields: Vec<&str>| {
        fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(out, "{}", line(header.to_vec()).trim_end())?;
    for r in rows {
        writeln!(out, "{}", line(r.iter().map(String::as_str).collect()).trim_end())?;
    }
    Ok(())
}

fn short(row: &SummaryRow) -> Vec<String> {
    let f2 = |v: f64| format!("{v:.2}");
    vec![
        row.model.clone(),
        row.long_trades.to_string(),
        row.short_trades.to_string(),
        f2(row.cum_profit),
        f2(row.gain_pct),
        row.win_rate.map(f2).unwrap_or_else(|| "-".into()),
        f2(row.total_fees),
        row.profit_per_trade.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
    ]
}

fn cmd_run(args: &RunArgs) -> Result<(), PipelineError> {
    let settings = resolve(args)?;
    let report = execute_run(&settings, &args.out)?;
    let rows: Vec<Vec<String>> = report.output.summary_rows().iter().map(short).collect();
    print_table(&rows, &SUMMARY_HEADER).map_err(|e| PipelineError::new("cli_report", Error::io("<stdout>", e)))?;
    if let Some(&(day, _, budget)) = report.output.benchmark.last() {
        log::info!("buy-and-hold budget {budget:.2} at day {day}");
    }
    let failures = report.output.failures();
    if let Some((_, first)) = failures.first() {
        for (spec, e) in &failures {
            eprintln!("{} model={}", e.line(), spec.kind().name());
        }
        return Err(PipelineError::new(
            first.module,
            Error::Config(format!(
                "{} of {} detectors failed; see failures.csv",
                failures.len(),
                settings.detectors.len()
            )),
        ));
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), PipelineError> {
    let cmp = compare_runs(&args.runs, &args.out)?;
    if cmp.duplicates_dropped > 0 {
        eprintln!("warning: dropped {} duplicate rows", cmp.duplicates_dropped);
    }
    let rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut f = vec![(i + 1).to_string(), r.run.clone()];
            f.extend(short(&r.row));
            f
        })
        .collect();
    let mut header = vec!["rank", "run"];
    header.extend(SUMMARY_HEADER);
    print_table(&rows, &header).map_err(|e| PipelineError::new("cli_report", Error::io("<stdout>", e)))
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), PipelineError> {
    let md = |e| PipelineError::new("market_data", e);
    let cfg = SyntheticConfig::from_spec_str(&args.synthetic).map_err(config_error)?;
    let series = generate_synthetic(&cfg).map_err(md)?;
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| md(Error::io(p, e)));
    write_csv(&series.records, create(&args.out)?).map_err(md)?;
    if let Some(path) = &args.labels {
        let mut w = create(path)?;
        let io_err = |e| md(Error::io(path, e));
        writeln!(w, "ts,anomaly").map_err(io_err)?;
        for (rec, kind) in series.records.iter().zip(&series.anomaly_kinds) {
            let name = kind.map(|k| k.to_string()).unwrap_or_default();
            writeln!(w, "{},{}", rec.ts, name).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(1)
        }
    }
}
