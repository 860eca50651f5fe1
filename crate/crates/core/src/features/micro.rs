//! Per-record book measures.

use crate::error::{Error, Result};
use crate::fixed::Fixed8;
use crate::market_data::LobRecord;

/// Best ask minus best bid.
pub fn compute_spread(record: &LobRecord) -> f64 {
    Fixed8::from_units(record.best_ask().units() - record.best_bid().units()).to_f64()
}

/// `(V_b - V_a) / (V_b + V_a)`.
pub fn compute_imbalance(bid_volume: f64, ask_volume: f64) -> Result<f64> {
    let total = bid_volume + ask_volume;
    if !(total > 0.0) {
        return Err(Error::UndefinedImbalance);
    }
    Ok(((bid_volume - ask_volume) / total).clamp(-1.0, 1.0))
}

/// Cumulative resting size over the first `levels` levels of each side.
pub fn compute_depth(record: &LobRecord, levels: usize) -> Result<(f64, f64)> {
    let max = record.levels();
    if levels == 0 || levels > max {
        return Err(Error::LevelOutOfRange { level: levels, max });
    }
    let sum = |v: &[Fixed8]| Fixed8::from_units(v[..levels].iter().map(|q| q.units()).sum()).to_f64();
    Ok((sum(&record.bid_sz), sum(&record.ask_sz)))
}

/// `|r| / v`; undefined for zero volume.
pub fn amihud_illiquidity(ret: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::UndefinedLiquidity);
    }
    Ok(ret.abs() / volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn book(bids: &[(&str, &str)], asks: &[(&str, &str)]) -> LobRecord {
        let p = |s: &str| s.parse::<Fixed8>().unwrap();
        LobRecord {
            ts: 0,
            open: p("100"),
            high: p("100"),
            low: p("100"),
            close: p("100"),
            volume: p("1"),
            bid_px: bids.iter().map(|b| p(b.0)).collect(),
            bid_sz: bids.iter().map(|b| p(b.1)).collect(),
            ask_px: asks.iter().map(|a| p(a.0)).collect(),
            ask_sz: asks.iter().map(|a| p(a.1)).collect(),
        }
    }

    #[test]
    fn spread_examples() {
        assert_eq!(compute_spread(&book(&[("99.9", "1")], &[("100.1", "1")])), 0.2);
        assert_eq!(compute_spread(&book(&[("100", "1")], &[("100", "1")])), 0.0);
        assert_eq!(compute_spread(&book(&[("30000", "1")], &[("30050", "1")])), 50.0);
    }

    #[test]
    fn imbalance_examples() {
        assert_eq!(compute_imbalance(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(compute_imbalance(150.0, 50.0).unwrap(), 0.5);
        assert_eq!(compute_imbalance(0.0, 80.0).unwrap(), -1.0);
        assert!(matches!(compute_imbalance(0.0, 0.0), Err(Error::UndefinedImbalance)));
    }

    #[test]
    fn depth_examples() {
        let sizes = ["1.5", "2", "0.25", "4", "3", "7.125", "0", "2.5", "9", "1"];
        let asks = ["0.5", "1", "1", "2", "3", "5", "8", "13", "21", "34"];
        let bid_px: Vec<String> = (0..10).map(|i| format!("{}", 100 - i)).collect();
        let ask_px: Vec<String> = (0..10).map(|i| format!("{}", 101 + i)).collect();
        let bids: Vec<(&str, &str)> = bid_px.iter().map(String::as_str).zip(sizes).collect();
        let askv: Vec<(&str, &str)> = ask_px.iter().map(String::as_str).zip(asks).collect();
        let r = book(&bids, &askv);
        assert_eq!(compute_depth(&r, 1).unwrap(), (1.5, 0.5));
        // spreadsheet-style running totals
        let mut acc_b = 0.0;
        let mut acc_a = 0.0;
        for i in 0..10 {
            acc_b += sizes[i].parse::<f64>().unwrap();
            acc_a += asks[i].parse::<f64>().unwrap();
        }
        assert_eq!(compute_depth(&r, 10).unwrap(), (acc_b, acc_a));
        assert!(matches!(compute_depth(&r, 0), Err(Error::LevelOutOfRange { .. })));
        assert!(matches!(compute_depth(&r, 11), Err(Error::LevelOutOfRange { .. })));

        let uniform: Vec<(&str, &str)> = bid_px.iter().map(|p| (p.as_str(), "3")).collect();
        let uniform_a: Vec<(&str, &str)> = ask_px.iter().map(|p| (p.as_str(), "3")).collect();
        assert_eq!(compute_depth(&book(&uniform, &uniform_a), 5).unwrap(), (15.0, 15.0));
    }

    #[test]
    fn amihud_examples() {
        assert_eq!(amihud_illiquidity(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(amihud_illiquidity(-0.02, 4.0).unwrap(), 0.005);
        assert!(matches!(amihud_illiquidity(0.01, 0.0), Err(Error::UndefinedLiquidity)));
    }

    proptest! {
        #[test]
        fn imbalance_antisymmetric_and_bounded(b in 0.0f64..1e6, a in 0.0f64..1e6) {
            prop_assume!(a + b > 0.0);
            let r = compute_imbalance(b, a).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert_eq!(r, -compute_imbalance(a, b).unwrap());
        }
    }
}
