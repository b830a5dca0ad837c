//! Canonical frequency bands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    HighGamma,
}

impl BandName {
    pub const ALL: [BandName; 6] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Beta,
        BandName::Gamma,
        BandName::HighGamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
            BandName::HighGamma => "high_gamma",
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BandName::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown band `{s}`")))
    }
}

/// A named pass band in Hz, `low_hz` inclusive and `high_hz` exclusive when
/// selecting spectral bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: BandName,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandSpec {
    pub const DELTA: BandSpec = BandSpec::new(BandName::Delta, 0.1, 4.0);
    pub const THETA: BandSpec = BandSpec::new(BandName::Theta, 4.0, 8.0);
    pub const ALPHA: BandSpec = BandSpec::new(BandName::Alpha, 8.0, 13.0);
    pub const BETA: BandSpec = BandSpec::new(BandName::Beta, 13.0, 30.0);
    pub const GAMMA: BandSpec = BandSpec::new(BandName::Gamma, 30.0, 60.0);
    pub const HIGH_GAMMA: BandSpec = BandSpec::new(BandName::HighGamma, 60.0, 200.0);

    pub const fn new(name: BandName, low_hz: f64, high_hz: f64) -> Self {
        BandSpec { name, low_hz, high_hz }
    }

    /// The six-band table used throughout the pipeline.
    pub fn canonical() -> Vec<BandSpec> {
        vec![
            Self::DELTA,
            Self::THETA,
            Self::ALPHA,
            Self::BETA,
            Self::GAMMA,
            Self::HIGH_GAMMA,
        ]
    }

    pub fn by_name(name: BandName) -> BandSpec {
        match name {
            BandName::Delta => Self::DELTA,
            BandName::Theta => Self::THETA,
            BandName::Alpha => Self::ALPHA,
            BandName::Beta => Self::BETA,
            BandName::Gamma => Self::GAMMA,
            BandName::HighGamma => Self::HIGH_GAMMA,
        }
    }

    /// Checks `0 < low < high < nyquist`. A band edge equal to Nyquist is rejected.
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(Error::invalid(format!(
                "band {}: need 0 < low ({}) < high ({})",
                self.name, self.low_hz, self.high_hz
            )));
        }
        if self.high_hz >= nyquist {
            return Err(Error::invalid(format!(
                "band {}: high edge {} Hz must be below Nyquist {} Hz",
                self.name, self.high_hz, nyquist
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, freq_hz: f64) -> bool {
        freq_hz >= self.low_hz && freq_hz < self.high_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_table() {
        let bands = BandSpec::canonical();
        assert_eq!(bands.len(), 6);
        assert_eq!(bands[0].low_hz, 0.1);
        assert_eq!(bands[5].high_hz, 200.0);
        for w in bands.windows(2) {
            assert_eq!(w[0].high_hz, w[1].low_hz);
        }
    }

    #[test]
    fn high_gamma_is_legal_at_500hz_but_not_at_400hz() {
        assert!(BandSpec::HIGH_GAMMA.validate(500.0).is_ok());
        assert!(BandSpec::HIGH_GAMMA.validate(400.0).is_err());
    }

    #[test]
    fn names_roundtrip() {
        for b in BandName::ALL {
            assert_eq!(b.as_str().parse::<BandName>().unwrap(), b);
        }
        assert!("kappa".parse::<BandName>().is_err());
    }
}
