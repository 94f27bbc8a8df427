use std::fmt;

use crate::error::{Error, Result};

/// Virtual time in integer microseconds.
///
/// Integer ticks keep event ordering exact: `k · interval` never drifts and
/// two runs compare times bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    const PER_SECOND: f64 = 1e6;

    /// Rounds to the nearest microsecond.
    pub fn from_secs(secs: f64) -> Result<Self> {
        if !(secs >= 0.0 && secs.is_finite()) {
            return Err(Error::arg(format!("virtual time must be finite and non-negative, got {secs}")));
        }
        let ticks = (secs * Self::PER_SECOND).round();
        if ticks > u64::MAX as f64 {
            return Err(Error::arg(format!("virtual time {secs} s overflows the clock")));
        }
        Ok(SimTime(ticks as u64))
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / Self::PER_SECOND
    }

    pub fn micros(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_on_tick_grid() {
        let t = SimTime::from_secs(0.2).unwrap();
        assert_eq!(t, SimTime(200_000));
        assert_eq!(t.as_secs(), 0.2);
        assert_eq!(SimTime(3 * 200_000).as_secs(), 0.6);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(SimTime::from_secs(-1e-9).is_err());
        assert!(SimTime::from_secs(f64::NAN).is_err());
        assert!(SimTime::from_secs(f64::INFINITY).is_err());
    }
}
