//! Exact percentage scores.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::Error;

const FRACTION_DIGITS: u32 = 6;
const SCALE: u64 = 10u64.pow(FRACTION_DIGITS);

/// A percentage held as an exact rational.
///
/// Displays as a fixed decimal with six fractional digits, rounding half up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(Ratio<u64>);

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("invalid decimal percentage {0:?}")]
pub struct ParseScoreError(pub String);

impl Score {
    pub const ZERO: Score = Score(Ratio::new_raw(0, 1));
    pub const HUNDRED: Score = Score(Ratio::new_raw(100, 1));

    /// `100 * max_depth / pattern_len`.
    pub fn from_depth(max_depth: usize, pattern_len: usize) -> Result<Score, Error> {
        if pattern_len == 0 {
            return Err(Error::ZeroLengthPattern);
        }
        Ok(Score(Ratio::new(
            100 * max_depth as u64,
            pattern_len as u64,
        )))
    }

    pub fn from_ratio(numer: u64, denom: u64) -> Score {
        Score(Ratio::new(numer, denom))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.numer() as u128;
        let d = self.denom() as u128;
        let scaled = (2 * n * SCALE as u128 + d) / (2 * d);
        let whole = scaled / SCALE as u128;
        let frac = scaled % SCALE as u128;
        write!(
            f,
            "{whole}.{frac:0width$}",
            width = FRACTION_DIGITS as usize
        )
    }
}

impl FromStr for Score {
    type Err = ParseScoreError;

    /// Parses a non-negative decimal such as `50`, `62.5` or `63.636364`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseScoreError(s.to_string());
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(err());
        }
        let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole)
            || !digits(frac)
            || frac.len() > 12
            || (s.contains('.') && frac.is_empty())
        {
            return Err(err());
        }
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| err())?
        };
        let denom = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| err())?
        };
        let numer = whole
            .checked_mul(denom)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Score(Ratio::new(numer, denom)))
    }
}

impl serde::Serialize for Score {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Score {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula() {
        assert_eq!(Score::from_depth(11, 11).unwrap(), Score::HUNDRED);
        assert_eq!(Score::from_depth(0, 7).unwrap(), Score::ZERO);
        assert_eq!(Score::from_depth(9, 12).unwrap(), Score::from_ratio(75, 1));
        assert_eq!(Score::from_depth(3, 0), Err(Error::ZeroLengthPattern));
    }

    #[test]
    fn rendering() {
        assert_eq!(Score::from_depth(7, 11).unwrap().to_string(), "63.636364");
        assert_eq!(Score::from_depth(2, 11).unwrap().to_string(), "18.181818");
        assert_eq!(Score::ZERO.to_string(), "0.000000");
        assert_eq!(Score::HUNDRED.to_string(), "100.000000");
        assert_eq!(Score::from_ratio(1, 3).to_string(), "0.333333");
        assert_eq!(Score::from_ratio(2, 3).to_string(), "0.666667");
        // exactly half a unit in the last place rounds up
        assert_eq!(Score::from_ratio(1, 2_000_000).to_string(), "0.000001");
    }

    #[test]
    fn parsing() {
        assert_eq!("50".parse::<Score>().unwrap(), Score::from_ratio(50, 1));
        assert_eq!("62.5".parse::<Score>().unwrap(), Score::from_ratio(125, 2));
        let s: Score = "63.636364".parse().unwrap();
        assert_eq!(s.to_string(), "63.636364");
        for bad in ["", ".", "5.", "-1", "1e3", "abc", "1.2.3"] {
            assert!(bad.parse::<Score>().is_err(), "{bad}");
        }
    }
}
