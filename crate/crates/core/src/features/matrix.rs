use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::LobRecord;
use crate::matrix::Matrix;
use crate::stats;

use super::micro::{amihud_illiquidity, compute_depth, compute_imbalance, compute_spread};
use super::rolling::{
    compute_inter_arrival, compute_momentum, immediate_volatility, log_returns, realized_volatility,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub vol_window: usize,
    pub realized_window: usize,
    pub depth_levels: usize,
    pub momentum_window: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            vol_window: 10,
            realized_window: 30,
            depth_levels: 5,
            momentum_window: 5,
        }
    }
}

impl FeatureParams {
    /// Leading rows without a full set of trailing windows.
    pub fn warm_up(&self) -> usize {
        self.vol_window
            .max(self.realized_window)
            .max(self.momentum_window)
            .max(1)
    }
}

pub const FEATURE_NAMES: [&str; 11] = [
    "exec_price",
    "spread",
    "imbalance",
    "trade_volume",
    "bid_depth",
    "ask_depth",
    "inter_arrival",
    "immediate_vol",
    "realized_vol",
    "amihud",
    "momentum",
];

/// Unstandardized feature values for one bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub exec_price: f64,
    pub spread: f64,
    pub imbalance: f64,
    pub trade_volume: f64,
    pub bid_depth: f64,
    pub ask_depth: f64,
    pub inter_arrival: f64,
    pub immediate_vol: f64,
    pub realized_vol: f64,
    pub amihud: f64,
    pub momentum: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.exec_price,
            self.spread,
            self.imbalance,
            self.trade_volume,
            self.bid_depth,
            self.ask_depth,
            self.inter_arrival,
            self.immediate_vol,
            self.realized_vol,
            self.amihud,
            self.momentum,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRow {
    pub source_row: usize,
    pub reason: String,
}

/// Standardized features, one row per retained bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub col_names: Vec<String>,
    pub col_means: Vec<f64>,
    pub col_stds: Vec<f64>,
    pub row_timestamps: Vec<i64>,
    /// Index into the input record slice for each row.
    pub source_rows: Vec<usize>,
    /// Raw (unstandardized) momentum per row, for trade direction.
    pub momentum: Vec<f64>,
    pub dropped_columns: Vec<String>,
    pub excluded_rows: Vec<ExcludedRow>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// CSV with header `ts,<col_names...>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["ts".to_string()];
        header.extend(self.col_names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.values.rows().enumerate() {
            let mut rec = vec![self.row_timestamps[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }
}

/// Raw feature vectors for every bar after warm-up. Rows that cannot be
/// computed are returned separately with a reason.
pub fn compute_feature_vectors(
    records: &[LobRecord],
    params: &FeatureParams,
) -> Result<(Vec<(usize, FeatureVector)>, Vec<ExcludedRow>)> {
    let warm = params.warm_up();
    if records.len() <= warm {
        return Err(Error::InsufficientData {
            needed: warm + 1,
            got: records.len(),
        });
    }
    let closes: Vec<f64> = records.iter().map(|r| r.close.to_f64()).collect();
    let ts: Vec<i64> = records.iter().map(|r| r.ts).collect();
    let gaps = compute_inter_arrival(&ts)?;
    let rets = log_returns(&closes)?;
    let imm = immediate_volatility(&closes, params.vol_window)?;
    let real = realized_volatility(&closes, params.realized_window)?;
    let mom = compute_momentum(&closes, params.momentum_window)?;

    let mut rows = Vec::with_capacity(records.len() - warm);
    let mut excluded = Vec::new();
    for (t, rec) in records.iter().enumerate().skip(warm) {
        let volume = rec.volume.to_f64();
        let bid_total: f64 = rec.bid_sz.iter().map(|q| q.to_f64()).sum();
        let ask_total: f64 = rec.ask_sz.iter().map(|q| q.to_f64()).sum();
        let imbalance = match compute_imbalance(bid_total, ask_total) {
            Ok(v) => v,
            Err(e) => {
                excluded.push(ExcludedRow {
                    source_row: t,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let amihud = match amihud_illiquidity(rets[t - 1], volume) {
            Ok(v) => v,
            Err(e) => {
                excluded.push(ExcludedRow {
                    source_row: t,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let (bid_depth, ask_depth) = compute_depth(rec, params.depth_levels)?;
        rows.push((
            t,
            FeatureVector {
                exec_price: closes[t],
                spread: compute_spread(rec),
                imbalance,
                trade_volume: volume,
                bid_depth,
                ask_depth,
                inter_arrival: gaps[t - 1],
                immediate_vol: imm[t - params.vol_window],
                realized_vol: real[t - params.realized_window],
                amihud,
                momentum: mom[t - params.momentum_window],
            },
        ));
    }
    Ok((rows, excluded))
}

/// Builds the z-scored feature matrix fed to every detector.
pub fn build_feature_matrix(records: &[LobRecord], params: &FeatureParams) -> Result<FeatureMatrix> {
    let (rows, excluded_rows) = compute_feature_vectors(records, params)?;
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: rows.len(),
        });
    }
    let raw: Vec<[f64; 11]> = rows.iter().map(|(_, f)| f.to_array()).collect();
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite feature value".into()));
    }

    let mut keep = Vec::new();
    let mut dropped_columns = Vec::new();
    let mut col_means = Vec::new();
    let mut col_stds = Vec::new();
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
        let constant = col.iter().all(|&v| v == col[0]);
        let sd = stats::population_std(&col);
        if constant || !(sd > 0.0) {
            dropped_columns.push(name.to_string());
            continue;
        }
        keep.push(j);
        col_means.push(stats::mean(&col));
        col_stds.push(sd);
    }
    if keep.is_empty() {
        return Err(Error::AllConstantFeatures);
    }
    if !dropped_columns.is_empty() {
        log::info!("dropped constant feature columns: {}", dropped_columns.join(","));
    }

    let p = keep.len();
    let mut data = Vec::with_capacity(raw.len() * p);
    for r in &raw {
        for (k, &j) in keep.iter().enumerate() {
            data.push((r[j] - col_means[k]) / col_stds[k]);
        }
    }
    Ok(FeatureMatrix {
        values: Matrix::new(raw.len(), p, data)?,
        col_names: keep.iter().map(|&j| FEATURE_NAMES[j].to_string()).collect(),
        col_means,
        col_stds,
        row_timestamps: rows.iter().map(|(t, _)| records[*t].ts).collect(),
        source_rows: rows.iter().map(|(t, _)| *t).collect(),
        momentum: rows.iter().map(|(_, f)| f.momentum).collect(),
        dropped_columns,
        excluded_rows,
    })
}
