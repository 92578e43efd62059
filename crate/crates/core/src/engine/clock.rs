use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// A calendar month, used only to label simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarMonth {
    pub year: i32,
    /// 1-based month of year.
    pub month: u32,
}

impl CalendarMonth {
    pub const fn new(year: i32, month: u32) -> Self {
        Self { year, month }
    }

    /// The month `offset` whole months after `self`.
    pub fn plus_months(self, offset: i64) -> Self {
        let zero_based = self.year as i64 * 12 + (self.month as i64 - 1) + offset;
        Self {
            year: zero_based.div_euclid(12) as i32,
            month: (zero_based.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn label(self) -> String {
        format!("{:04}-{:02}", self.year, self.month)
    }

    /// Parses `YYYY-MM`.
    pub fn parse(text: &str) -> Option<Self> {
        let (y, m) = text.trim().split_once('-')?;
        if y.len() != 4 || m.len() != 2 {
            return None;
        }
        let (year, month) = (y.parse().ok()?, m.parse().ok()?);
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    /// Whole months from `origin` to `self`, negative if earlier.
    pub fn months_since(self, origin: Self) -> i64 {
        (self.year as i64 - origin.year as i64) * 12 + self.month as i64 - origin.month as i64
    }
}

/// Fixed-step simulation clock. Time is measured in months from `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub start: CalendarMonth,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
}

impl Default for SimClock {
    /// January 2018, quarter-month steps, 50 months with a 24-month burn-in.
    fn default() -> Self {
        Self {
            start: CalendarMonth::new(2018, 1),
            dt: 0.25,
            horizon: 50.0,
            burn_in: 24.0,
        }
    }
}

impl SimClock {
    pub fn new(dt: f64, horizon: f64, burn_in: f64) -> Result<Self, SimError> {
        let clock = Self {
            dt,
            horizon,
            burn_in,
            ..Self::default()
        };
        clock.validate()?;
        Ok(clock)
    }

    pub fn with_dt(self, dt: f64) -> Result<Self, SimError> {
        let clock = Self { dt, ..self };
        clock.validate()?;
        Ok(clock)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidClock(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SimError::InvalidClock(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(SimError::InvalidClock(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.horizon) {
            return Err(SimError::InvalidClock(format!(
                "burn-in {} must lie in [0, horizon)",
                self.burn_in
            )));
        }
        Ok(())
    }

    /// Number of Euler steps; the trajectory has `steps() + 1` samples.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Time of sample `k`. Computed as `k * dt` so grid points are exact for
    /// power-of-two step sizes.
    pub fn time_at(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn analytical_window(&self) -> f64 {
        self.horizon - self.burn_in
    }

    /// True when `t` falls in `[burn_in, horizon)`.
    pub fn in_window(&self, t: f64) -> bool {
        t >= self.burn_in - 1e-9 && t < self.horizon - 1e-9
    }

    pub fn calendar_month(&self, t: f64) -> CalendarMonth {
        self.start.plus_months((t + 1e-9).floor() as i64)
    }

    pub fn calendar_label(&self, t: f64) -> String {
        self.calendar_month(t).label()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_clock_matches_study_protocol() {
        let clock = SimClock::default();
        assert_eq!(clock.steps(), 200);
        assert_eq!(clock.analytical_window(), 26.0);
        assert_eq!(clock.calendar_label(0.0), "2018-01");
        assert_eq!(clock.calendar_label(24.0), "2020-01");
        assert_eq!(clock.calendar_label(26.75), "2020-03");
        assert_eq!(clock.calendar_label(49.0), "2022-02");
        assert_eq!(clock.calendar_label(50.0), "2022-03");
    }

    #[test]
    fn rejects_bad_clocks() {
        assert!(SimClock::new(0.0, 50.0, 24.0).is_err());
        assert!(SimClock::new(-0.25, 50.0, 24.0).is_err());
        assert!(SimClock::new(0.3, 50.0, 24.0).is_err());
        assert!(SimClock::new(0.25, 50.0, 50.0).is_err());
        assert!(SimClock::new(0.125, 50.0, 24.0).is_ok());
    }

    #[test]
    fn month_arithmetic_wraps_years() {
        let m = CalendarMonth::new(2018, 11);
        assert_eq!(m.plus_months(2), CalendarMonth::new(2019, 1));
        assert_eq!(m.plus_months(-11), CalendarMonth::new(2017, 12));
        assert_eq!(
            CalendarMonth::new(2020, 3).months_since(CalendarMonth::new(2018, 1)),
            26
        );
    }

    #[test]
    fn parses_month_labels() {
        assert_eq!(CalendarMonth::parse("2021-01"), Some(CalendarMonth::new(2021, 1)));
        for bad in ["2021-13", "2021-1", "21-01", "2021/01", ""] {
            assert_eq!(CalendarMonth::parse(bad), None, "{bad}");
        }
    }
}
