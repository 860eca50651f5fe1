use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fixed::{Price, Quantity};

/// One bar of OHLCV data plus an end-of-bar snapshot of `L` book levels.
///
/// Level 0 of each side is the top of book.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LobRecord {
    /// Epoch milliseconds, UTC.
    pub ts: i64,
    pub open: Price,
    pub high: Price,
    pub low: Price,
    pub close: Price,
    pub volume: Quantity,
    pub bid_px: Vec<Price>,
    pub bid_sz: Vec<Quantity>,
    pub ask_px: Vec<Price>,
    pub ask_sz: Vec<Quantity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bid,
    Ask,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        })
    }
}

/// A broken record or series invariant. Levels are reported 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    NonPositiveLow,
    LowExceedsHigh,
    OpenOutsideRange,
    CloseOutsideRange,
    NegativeVolume,
    LevelCountMismatch,
    NonPositiveBookPrice { side: Side, level: usize },
    NegativeBookSize { side: Side, level: usize },
    BidsNotDecreasing { level: usize },
    AsksNotIncreasing { level: usize },
    CrossedBook,
    DuplicateTimestamp,
    DecreasingTimestamp,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveLow => f.write_str("low is not positive"),
            Violation::LowExceedsHigh => f.write_str("low exceeds high"),
            Violation::OpenOutsideRange => f.write_str("open outside [low, high]"),
            Violation::CloseOutsideRange => f.write_str("close outside [low, high]"),
            Violation::NegativeVolume => f.write_str("negative volume"),
            Violation::LevelCountMismatch => f.write_str("book sides have different level counts"),
            Violation::NonPositiveBookPrice { side, level } => {
                write!(f, "{side} price at level {level} is not positive")
            }
            Violation::NegativeBookSize { side, level } => {
                write!(f, "{side} size at level {level} is negative")
            }
            Violation::BidsNotDecreasing { level } => {
                write!(f, "bid prices not strictly decreasing at level {level}")
            }
            Violation::AsksNotIncreasing { level } => {
                write!(f, "ask prices not strictly increasing at level {level}")
            }
            Violation::CrossedBook => f.write_str("crossed book: best ask below best bid"),
            Violation::DuplicateTimestamp => f.write_str("duplicate timestamp"),
            Violation::DecreasingTimestamp => f.write_str("timestamp decreases"),
        }
    }
}

impl LobRecord {
    pub fn levels(&self) -> usize {
        self.bid_px.len()
    }

    pub fn best_bid(&self) -> Price {
        self.bid_px[0]
    }

    pub fn best_ask(&self) -> Price {
        self.ask_px[0]
    }

    /// Record-local invariant violations, in a fixed order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.low.is_positive() {
            out.push(Violation::NonPositiveLow);
        }
        if self.low > self.high {
            out.push(Violation::LowExceedsHigh);
        } else {
            if self.open < self.low || self.open > self.high {
                out.push(Violation::OpenOutsideRange);
            }
            if self.close < self.low || self.close > self.high {
                out.push(Violation::CloseOutsideRange);
            }
        }
        if self.volume.is_negative() {
            out.push(Violation::NegativeVolume);
        }
        let l = self.bid_px.len();
        if l == 0 || self.bid_sz.len() != l || self.ask_px.len() != l || self.ask_sz.len() != l {
            out.push(Violation::LevelCountMismatch);
            return out;
        }
        for (side, px, sz) in [
            (Side::Bid, &self.bid_px, &self.bid_sz),
            (Side::Ask, &self.ask_px, &self.ask_sz),
        ] {
            for i in 0..l {
                if !px[i].is_positive() {
                    out.push(Violation::NonPositiveBookPrice { side, level: i + 1 });
                }
                if sz[i].is_negative() {
                    out.push(Violation::NegativeBookSize { side, level: i + 1 });
                }
            }
        }
        for i in 1..l {
            if self.bid_px[i] >= self.bid_px[i - 1] {
                out.push(Violation::BidsNotDecreasing { level: i + 1 });
            }
            if self.ask_px[i] <= self.ask_px[i - 1] {
                out.push(Violation::AsksNotIncreasing { level: i + 1 });
            }
        }
        if self.ask_px[0] < self.bid_px[0] {
            out.push(Violation::CrossedBook);
        }
        out
    }
}

/// A violation located at a record index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesViolation {
    pub index: usize,
    pub violation: Violation,
}

/// Every invariant violation in the series; empty iff the series is clean.
pub fn validate_series(records: &[LobRecord]) -> Vec<SeriesViolation> {
    let mut out = Vec::new();
    for (index, rec) in records.iter().enumerate() {
        out.extend(
            rec.violations()
                .into_iter()
                .map(|violation| SeriesViolation { index, violation }),
        );
        if index > 0 {
            let prev = records[index - 1].ts;
            let violation = if rec.ts == prev {
                Some(Violation::DuplicateTimestamp)
            } else if rec.ts < prev {
                Some(Violation::DecreasingTimestamp)
            } else {
                None
            };
            if let Some(violation) = violation {
                out.push(SeriesViolation { index, violation });
            }
        }
    }
    out
}
