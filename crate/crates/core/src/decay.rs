//! Exponential down-weighting of older observations.

use serde::{Deserialize, Serialize};

use crate::network::DataError;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_WEEK: f64 = 7.0 * SECONDS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Age at which a same-day observation reaches `terminal_weight`.
    pub day_window_s: f64,
    /// Week offset at which a historical observation reaches `terminal_weight`.
    pub week_window_count: u32,
    pub terminal_weight: f64,
    /// Offset of local time from UTC, used to find day boundaries.
    pub utc_offset_s: i64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            day_window_s: 7200.0,
            week_window_count: 10,
            terminal_weight: 0.2,
            utc_offset_s: 0,
        }
    }
}

impl DecayConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.day_window_s.is_finite() && self.day_window_s > 0.0) {
            return Err("day_window_s must be positive".into());
        }
        if self.week_window_count == 0 {
            return Err("week_window_count must be >= 1".into());
        }
        if !(self.terminal_weight > 0.0 && self.terminal_weight < 1.0) {
            return Err("terminal_weight must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Local calendar day index of a UTC timestamp.
    pub fn local_day(&self, t: f64) -> i64 {
        ((t + self.utc_offset_s as f64) / SECONDS_PER_DAY).floor() as i64
    }
}

/// Whole weeks separating the local days of two timestamps.
pub fn week_offset(obs_time: f64, current_time: f64, cfg: &DecayConfig) -> i64 {
    (cfg.local_day(current_time) - cfg.local_day(obs_time)).div_euclid(7)
}

/// Weight of an observation made at `obs_time` when estimating at
/// `current_time`.
///
/// Same-day age (after removing whole weeks) and week offset decay
/// independently, each reaching `terminal_weight` at the edge of its window.
pub fn decay_weight(obs_time: f64, current_time: f64, cfg: &DecayConfig) -> Result<f64, DataError> {
    if obs_time > current_time {
        return Err(DataError::FutureObservation { obs_time, current_time });
    }
    let weeks = week_offset(obs_time, current_time, cfg);
    let age = ((current_time - obs_time) - weeks as f64 * SECONDS_PER_WEEK).abs();
    let ln_w = cfg.terminal_weight.ln();
    let exponent = age / cfg.day_window_s + weeks as f64 / f64::from(cfg.week_window_count);
    Ok((ln_w * exponent).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DecayConfig {
        DecayConfig {
            day_window_s: 3600.0,
            week_window_count: 1,
            ..DecayConfig::default()
        }
    }

    #[test]
    fn anchored_values() {
        let c = cfg();
        let now = 10.0 * SECONDS_PER_WEEK + 12.0 * 3600.0;
        assert_eq!(decay_weight(now, now, &c).unwrap(), 1.0);
        assert!((decay_weight(now - 3600.0, now, &c).unwrap() - 0.2).abs() < 1e-15);
        assert!((decay_weight(now - 1800.0, now, &c).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
        assert!((decay_weight(now - SECONDS_PER_WEEK, now, &c).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn historical_slices_measure_age_from_same_time_of_day() {
        let c = cfg();
        let now = 10.0 * SECONDS_PER_WEEK + 12.0 * 3600.0;
        let before = decay_weight(now - SECONDS_PER_WEEK - 600.0, now, &c).unwrap();
        let after = decay_weight(now - SECONDS_PER_WEEK + 600.0, now, &c).unwrap();
        assert!((before - after).abs() < 1e-15);
        assert!((before - 0.2 * 0.2f64.powf(600.0 / 3600.0)).abs() < 1e-15);
    }

    #[test]
    fn future_is_an_error() {
        assert!(decay_weight(10.0, 5.0, &cfg()).is_err());
    }

    #[test]
    fn timezone_shifts_day_boundary() {
        let mut c = cfg();
        let now = 14.0 * SECONDS_PER_DAY + 0.5 * 3600.0;
        let then = 7.0 * SECONDS_PER_DAY + 23.5 * 3600.0;
        assert_eq!(week_offset(then, now, &c), 1);
        // One hour east of UTC the older fix falls on local day 8.
        c.utc_offset_s = 3600;
        assert_eq!(c.local_day(then), 8);
        assert_eq!(week_offset(then, now, &c), 0);
    }
}
