//! Fixed-point decimal with eight fractional digits.
//!
//! Prices and quantities are read from text exactly and written back
//! bit-for-bit, so ledgers never pick up float round-trip drift.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const SCALE: i64 = 100_000_000;
const DIGITS: usize = 8;

/// A decimal value stored as an integer count of 1e-8 units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Fixed8(i64);

pub type Price = Fixed8;
pub type Quantity = Fixed8;

impl Fixed8 {
    pub const ZERO: Fixed8 = Fixed8(0);

    pub const fn from_units(units: i64) -> Self {
        Fixed8(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    /// Rounds `value` to the nearest representable decimal.
    pub fn from_f64(value: f64) -> Self {
        Fixed8((value * SCALE as f64).round() as i64)
    }

    /// Nearest `f64` to the decimal value.
    pub fn to_f64(self) -> f64 {
        // Both operands are exact below 2^53, so the single division rounds correctly.
        if self.0.unsigned_abs() < (1u64 << 53) {
            self.0 as f64 / SCALE as f64
        } else {
            self.to_string().parse().unwrap_or(f64::NAN)
        }
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFixedError(String);

impl fmt::Display for ParseFixedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid decimal {:?}", self.0)
    }
}

impl std::error::Error for ParseFixedError {}

impl FromStr for Fixed8 {
    type Err = ParseFixedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFixedError(s.to_string());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if frac_part.len() > DIGITS
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let mut frac: i64 = 0;
        for (i, b) in frac_part.bytes().enumerate() {
            frac += i64::from(b - b'0') * 10i64.pow((DIGITS - 1 - i) as u32);
        }
        let units = int
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Fixed8(if neg { -units } else { units }))
    }
}

impl fmt::Display for Fixed8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if frac == 0 {
            return write!(f, "{sign}{int}");
        }
        let digits = format!("{frac:08}");
        write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
    }
}

impl From<Fixed8> for String {
    fn from(v: Fixed8) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for Fixed8 {
    type Error = ParseFixedError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
