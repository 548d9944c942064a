//! Exact fractions for supports, confidences and user-supplied minima.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Fraction = Ratio<u64>;

/// `count / total` as an exact fraction; `0/0` is treated as zero.
pub fn fraction(count: u64, total: u64) -> Fraction {
    if total == 0 {
        Fraction::from_integer(0)
    } else {
        Fraction::new(count, total)
    }
}

pub fn to_f64(f: Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

/// `round(100 * f)` with halves rounded up.
pub fn percent_half_up(f: Fraction) -> u64 {
    let scaled = f * Fraction::from_integer(100) + Fraction::new(1, 2);
    scaled.to_integer()
}

/// Renders as `n/d` (or `n` when integral).
pub fn format_exact(f: Fraction) -> String {
    if *f.denom() == 1 {
        f.numer().to_string()
    } else {
        format!("{}/{}", f.numer(), f.denom())
    }
}

pub fn parse_exact(s: &str) -> Result<Fraction, ThresholdError> {
    let bad = || ThresholdError::Malformed(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Fraction::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 18
    {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let denom = 10u64.pow(frac.len() as u32);
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let numer = int
        .checked_mul(denom)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Fraction::new(numer, denom))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThresholdError {
    #[error("`{0}` is not a decimal or n/d fraction")]
    Malformed(String),
    #[error("threshold {0} is outside (0, 1]")]
    OutOfRange(String),
}

/// A minimum support or confidence, an exact value in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(Fraction);

impl Threshold {
    pub fn new(value: Fraction) -> Result<Self, ThresholdError> {
        if value > Fraction::from_integer(0) && value <= Fraction::from_integer(1) {
            Ok(Threshold(value))
        } else {
            Err(ThresholdError::OutOfRange(format_exact(value)))
        }
    }

    pub fn ratio(numer: u64, denom: u64) -> Result<Self, ThresholdError> {
        if denom == 0 {
            return Err(ThresholdError::Malformed(format!("{numer}/0")));
        }
        Threshold::new(Fraction::new(numer, denom))
    }

    pub fn get(self) -> Fraction {
        self.0
    }

    /// Whether `count` out of `total` reaches this threshold.
    pub fn admits(self, count: u64, total: u64) -> bool {
        total > 0 && (count as u128) * (*self.0.denom() as u128) >= (*self.0.numer() as u128) * (total as u128)
    }
}

impl FromStr for Threshold {
    type Err = ThresholdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Threshold::new(parse_exact(s)?)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_exact(self.0))
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        let text = match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s,
            Raw::Number(n) => n.to_string(),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helpers writing a fraction as its decimal value next to an exact `n/d` string.
pub(crate) mod exact {
    use super::*;

    pub fn serialize<S: Serializer>(f: &Fraction, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&format_exact(*f))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Fraction, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        parse_exact(&s).map_err(serde::de::Error::custom)
    }
}
