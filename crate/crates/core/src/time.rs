//! Simulation clock values.
//!
//! Time is kept as an integer count of microseconds so that simultaneous
//! events compare exactly and tie-break purely on insertion order.

use std::fmt;
use std::ops::{Add, Sub};

pub const MICROS_PER_SEC: u64 = 1_000_000;

/// A point on the simulation clock, in whole microseconds since start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * MICROS_PER_SEC)
    }

    /// Rounds to the nearest microsecond. Negative and non-finite inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if !s.is_finite() || s <= 0.0 {
            return SimTime(0);
        }
        SimTime((s * MICROS_PER_SEC as f64).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }

    /// Parses the fixed `<secs>.<micros>` rendering produced by `Display`.
    pub fn parse(s: &str) -> Option<SimTime> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 6 {
            return None;
        }
        let secs: u64 = whole.parse().ok()?;
        let mut us = 0u64;
        if !frac.is_empty() {
            let digits: u64 = frac.parse().ok()?;
            us = digits * 10u64.pow(6 - frac.len() as u32);
        }
        Some(SimTime(secs.checked_mul(MICROS_PER_SEC)?.checked_add(us)?))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / MICROS_PER_SEC, self.0 % MICROS_PER_SEC)
    }
}

/// A non-negative span of simulation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimDuration(u64);

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub const fn from_micros(us: u64) -> Self {
        SimDuration(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimDuration(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimDuration(s * MICROS_PER_SEC)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        SimDuration(SimTime::from_secs_f64(s).as_micros())
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub const fn mul(self, k: u64) -> SimDuration {
        SimDuration(self.0 * k)
    }
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub<SimDuration> for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_fixed_six_decimals() {
        assert_eq!(SimTime::from_micros(60_250_000).to_string(), "60.250000");
        assert_eq!(SimTime::ZERO.to_string(), "0.000000");
        assert_eq!(SimTime::from_micros(7).to_string(), "0.000007");
    }

    #[test]
    fn parse_round_trips_display() {
        for us in [0u64, 1, 999_999, 1_000_000, 150_000_000, 123_456_789] {
            let t = SimTime::from_micros(us);
            assert_eq!(SimTime::parse(&t.to_string()), Some(t));
        }
        assert_eq!(SimTime::parse("5"), Some(SimTime::from_secs(5)));
        assert_eq!(SimTime::parse("5.5"), Some(SimTime::from_micros(5_500_000)));
        assert_eq!(SimTime::parse("x"), None);
        assert_eq!(SimTime::parse("1.1234567"), None);
    }

    #[test]
    fn from_secs_rounds_to_microsecond() {
        assert_eq!(SimTime::from_secs_f64(0.25).as_micros(), 250_000);
        assert_eq!(SimTime::from_secs_f64(1e-7).as_micros(), 0);
        assert_eq!(SimTime::from_secs_f64(-3.0), SimTime::ZERO);
    }
}
