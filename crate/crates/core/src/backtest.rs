//! Sequential single-position backtest with fixed-fractional sizing.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Direction, TradeSignal};

const DAY_MS: i64 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitRule {
    /// Close at the next bar's close.
    NextBar,
    /// Close at the bar of the next signal; the final signal has no exit.
    NextSignal,
}

impl ExitRule {
    pub fn name(self) -> &'static str {
        match self {
            ExitRule::NextBar => "next_bar",
            ExitRule::NextSignal => "next_signal",
        }
    }
}

impl fmt::Display for ExitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "next_bar" => Ok(ExitRule::NextBar),
            "next_signal" => Ok(ExitRule::NextSignal),
            _ => Err(Error::Config(format!(
                "unknown exit rule '{s}' (expected next_bar or next_signal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub initial_budget: f64,
    pub fraction: f64,
    pub fee_rate: f64,
    pub apply_fees: bool,
    pub exit_rule: ExitRule,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            initial_budget: 1500.0,
            fraction: 0.3333,
            fee_rate: 0.0008,
            apply_fees: false,
            exit_rule: ExitRule::NextBar,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_budget > 0.0 && self.initial_budget.is_finite()) {
            return Err(Error::Config(format!(
                "initial budget {} must be positive",
                self.initial_budget
            )));
        }
        if !(self.fraction >= 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!(
                "fraction {} must lie in [0, 1]",
                self.fraction
            )));
        }
        if !(self.fee_rate >= 0.0 && self.fee_rate.is_finite()) {
            return Err(Error::Config(format!(
                "fee rate {} must be non-negative",
                self.fee_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeLedgerEntry {
    pub entry_ts: i64,
    pub exit_ts: i64,
    pub direction: Direction,
    pub amount: f64,
    pub entry_price: f64,
    pub exit_price: f64,
    /// Return earned by the position: positive when the trade wins.
    pub price_change: f64,
    pub profit: f64,
    pub fee: f64,
    pub budget_after: f64,
    /// Profit relative to the budget before the trade.
    pub budget_return: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktestDiagnostics {
    /// Signals that arrived while a position was open.
    pub skipped_overlapping: usize,
    /// Signals without a later bar (or later signal) to exit on.
    pub dropped_no_exit: usize,
    /// Signals whose timestamp is not a bar of the price series.
    pub dropped_unknown_ts: usize,
    /// Exit timestamp of the trade that exhausted the budget.
    pub ruined_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub config: BacktestConfig,
    pub ledger: Vec<TradeLedgerEntry>,
    /// Initial budget at the first bar, then the budget after every exit.
    pub equity_curve: Vec<(i64, f64)>,
    pub final_budget: f64,
    pub cumulative_profit: f64,
    pub gain_pct: f64,
    pub win_rate: Option<f64>,
    pub long_count: usize,
    pub short_count: usize,
    pub total_fees: f64,
    pub profit_per_trade: Option<f64>,
    pub benchmark_profit: Option<f64>,
    pub diagnostics: BacktestDiagnostics,
}

impl BacktestResult {
    pub fn trade_count(&self) -> usize {
        self.ledger.len()
    }

    /// CSV with header `entry_ts,exit_ts,direction,amount,entry_price,exit_price,profit,fee,budget_after`.
    pub fn write_ledger_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "entry_ts",
            "exit_ts",
            "direction",
            "amount",
            "entry_price",
            "exit_price",
            "profit",
            "fee",
            "budget_after",
        ])?;
        for e in &self.ledger {
            w.write_record([
                e.entry_ts.to_string(),
                e.exit_ts.to_string(),
                e.direction.to_string(),
                e.amount.to_string(),
                e.entry_price.to_string(),
                e.exit_price.to_string(),
                e.profit.to_string(),
                e.fee.to_string(),
                e.budget_after.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<ledger csv>", e))?;
        Ok(())
    }

    /// CSV with header `ts,budget`.
    pub fn write_equity_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ts", "budget"])?;
        for (ts, b) in &self.equity_curve {
            w.write_record([ts.to_string(), b.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<equity csv>", e))?;
        Ok(())
    }
}

/// Return earned by a position: `(entry - exit) / entry` for shorts, negated for longs.
pub fn signed_return(direction: Direction, entry: f64, exit: f64) -> f64 {
    match direction {
        Direction::Short => (entry - exit) / entry,
        Direction::Long => (exit - entry) / entry,
    }
}

/// Simulates the signals against a bar series (`timestamps` strictly increasing).
pub fn run_backtest(
    signals: &[TradeSignal],
    timestamps: &[i64],
    closes: &[f64],
    config: &BacktestConfig,
) -> Result<BacktestResult> {
    config.validate()?;
    if timestamps.len() != closes.len() {
        return Err(Error::Backtest(format!(
            "{} timestamps for {} closes",
            timestamps.len(),
            closes.len()
        )));
    }
    if timestamps.is_empty() {
        return Err(Error::Backtest("empty price series".into()));
    }
    if let Some(i) = closes.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::NonPositivePrice { index: i });
    }
    if signals.windows(2).any(|w| w[1].ts < w[0].ts) {
        return Err(Error::Backtest("signals are not sorted by time".into()));
    }

    let mut diag = BacktestDiagnostics::default();
    let located: Vec<(usize, &TradeSignal)> = signals
        .iter()
        .filter_map(|s| match timestamps.binary_search(&s.ts) {
            Ok(i) => Some((i, s)),
            Err(_) => {
                diag.dropped_unknown_ts += 1;
                None
            }
        })
        .collect();

    let mut budget = config.initial_budget;
    let mut ledger = Vec::new();
    let mut equity = vec![(timestamps[0], budget)];
    let mut open_until: Option<usize> = None;
    for (k, &(entry_ix, sig)) in located.iter().enumerate() {
        if open_until.is_some_and(|exit_ix| entry_ix < exit_ix) {
            diag.skipped_overlapping += 1;
            continue;
        }
        let exit_ix = match config.exit_rule {
            ExitRule::NextBar => (entry_ix + 1 < closes.len()).then_some(entry_ix + 1),
            ExitRule::NextSignal => located[k + 1..]
                .iter()
                .map(|&(i, _)| i)
                .find(|&i| i > entry_ix),
        };
        let Some(exit_ix) = exit_ix else {
            diag.dropped_no_exit += 1;
            continue;
        };
        let (entry, exit) = (closes[entry_ix], closes[exit_ix]);
        let amount = config.fraction * budget;
        let change = signed_return(sig.direction, entry, exit);
        let profit = amount * change;
        let fee = amount * config.fee_rate;
        let before = budget;
        budget += profit;
        if config.apply_fees {
            budget -= fee;
        }
        ledger.push(TradeLedgerEntry {
            entry_ts: timestamps[entry_ix],
            exit_ts: timestamps[exit_ix],
            direction: sig.direction,
            amount,
            entry_price: entry,
            exit_price: exit,
            price_change: change,
            profit,
            fee,
            budget_after: budget,
            budget_return: profit / before,
        });
        equity.push((timestamps[exit_ix], budget));
        open_until = Some(exit_ix);
        if budget <= 0.0 {
            log::warn!("budget exhausted at ts {}", timestamps[exit_ix]);
            diag.ruined_at = Some(timestamps[exit_ix]);
            break;
        }
    }

    let cumulative_profit = budget - config.initial_budget;
    let n_trades = ledger.len();
    let benchmark_profit = match buy_and_hold(timestamps, closes, config.initial_budget) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("buy-and-hold benchmark unavailable: {e}");
            None
        }
    };
    Ok(BacktestResult {
        config: *config,
        win_rate: win_rate(&ledger),
        long_count: ledger.iter().filter(|e| e.direction == Direction::Long).count(),
        short_count: ledger.iter().filter(|e| e.direction == Direction::Short).count(),
        total_fees: fee_report(&ledger, config.fee_rate).total,
        profit_per_trade: profit_per_trade(cumulative_profit, n_trades).ok(),
        gain_pct: cumulative_profit / config.initial_budget * 100.0,
        final_budget: budget,
        cumulative_profit,
        benchmark_profit,
        equity_curve: equity,
        ledger,
        diagnostics: diag,
    })
}

/// Last close of each UTC day, in day order.
pub fn daily_closes(timestamps: &[i64], closes: &[f64]) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    for (&ts, &c) in timestamps.iter().zip(closes) {
        let day = ts.div_euclid(DAY_MS);
        match out.last_mut() {
            Some(last) if last.0 == day => last.1 = c,
            _ => out.push((day, c)),
        }
    }
    out
}

/// `B0 * (1 + sum of daily returns) - B0`, without compounding.
pub fn buy_and_hold(timestamps: &[i64], closes: &[f64], initial_budget: f64) -> Result<f64> {
    let daily = daily_closes(timestamps, closes);
    if daily.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: daily.len(),
        });
    }
    let returns: Vec<f64> = daily.windows(2).map(|w| w[1].1 / w[0].1 - 1.0).collect();
    Ok(buy_and_hold_from_returns(&returns, initial_budget))
}

pub fn buy_and_hold_from_returns(daily_returns: &[f64], initial_budget: f64) -> f64 {
    initial_budget * (1.0 + daily_returns.iter().sum::<f64>()) - initial_budget
}

/// Percentage of trades with positive profit; `None` for an empty ledger.
pub fn win_rate(ledger: &[TradeLedgerEntry]) -> Option<f64> {
    if ledger.is_empty() {
        return None;
    }
    let wins = ledger.iter().filter(|e| e.profit > 0.0).count();
    Some(wins as f64 / ledger.len() as f64 * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeeReport {
    pub total: f64,
    pub per_trade: Vec<f64>,
}

/// Fees at `fee_rate` per trade notional, whether or not they were charged.
pub fn fee_report(ledger: &[TradeLedgerEntry], fee_rate: f64) -> FeeReport {
    let per_trade: Vec<f64> = ledger.iter().map(|e| e.amount * fee_rate).collect();
    FeeReport {
        total: per_trade.iter().sum(),
        per_trade,
    }
}

pub fn profit_per_trade(cumulative_profit: f64, n_trades: usize) -> Result<f64> {
    if n_trades == 0 {
        return Err(Error::Backtest("profit per trade undefined without trades".into()));
    }
    Ok(cumulative_profit / n_trades as f64)
}
