use serde::{Deserialize, Serialize};

/// `STEP(magnitude, start_time)`: zero before `start_time`, `magnitude` from then on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInput {
    pub magnitude: f64,
    pub start_time: f64,
}

impl StepInput {
    pub const fn new(magnitude: f64, start_time: f64) -> Self {
        Self { magnitude, start_time }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.start_time {
            0.0
        } else {
            self.magnitude
        }
    }
}

/// First-order exponential smoothing, `d(current)/dt = (input - current) / delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothState {
    pub current: f64,
    pub delay: f64,
}

impl SmoothState {
    pub const fn new(current: f64, delay: f64) -> Self {
        Self { current, delay }
    }

    pub fn derivative(&self, input: f64) -> f64 {
        (input - self.current) / self.delay
    }

    /// One explicit Euler step.
    pub fn advance(self, input: f64, dt: f64) -> Self {
        Self {
            current: self.current + dt * self.derivative(input),
            ..self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_switches_at_start() {
        let s = StepInput::new(0.35, 24.0);
        assert_eq!(s.eval(23.75), 0.0);
        assert_eq!(s.eval(24.0), 0.35);
        let neg = StepInput::new(-0.9, 26.75);
        assert_eq!(neg.eval(30.0), -0.9);
        assert_eq!(neg.eval(26.5), 0.0);
    }

    #[test]
    fn smooth_single_step_and_fixed_point() {
        let s = SmoothState::new(0.0, 2.0).advance(1.0, 0.25);
        assert_abs_diff_eq!(s.current, 0.125, epsilon = 1e-15);
        let fixed = SmoothState::new(1.0, 2.0).advance(1.0, 0.25);
        assert_eq!(fixed.current, 1.0);
    }

    #[test]
    fn smooth_eight_steps_matches_geometric_oracle() {
        let mut s = SmoothState::new(0.0, 2.0);
        for _ in 0..8 {
            s = s.advance(1.0, 0.25);
        }
        let oracle = 1.0 - (1.0f64 - 0.125).powi(8);
        assert_abs_diff_eq!(s.current, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(s.current, 0.6564, epsilon = 5e-4);
    }

    #[test]
    fn smooth_converges_within_ten_delays() {
        let delay = 3.0;
        let dt = 0.25;
        let mut s = SmoothState::new(0.0, delay);
        let steps = (10.0 * delay / dt) as usize;
        for _ in 0..steps {
            s = s.advance(5.0, dt);
        }
        assert!((s.current - 5.0).abs() < 0.01 * 5.0);
    }
}
