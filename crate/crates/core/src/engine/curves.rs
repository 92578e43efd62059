//! Clamped parametric effect curves.
//!
//! System-dynamics models usually express nonlinear effects as hand-drawn
//! lookup tables. Here the tables are replaced by the fitted parametric
//! forms: an S-shaped logistic and an asymptotic Gompertz.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// `y = y_max + (y_min - y_max) / (1 + (r / inflection)^slope)`.
///
/// Rises from `y_min` at `r = 0` to `y_max` as `r -> inf`, passing through the
/// midpoint at `r = inflection`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticCurve {
    pub y_max: f64,
    pub y_min: f64,
    pub inflection: f64,
    pub slope: f64,
}

impl LogisticCurve {
    pub fn new(y_max: f64, y_min: f64, inflection: f64, slope: f64) -> Result<Self, ParamError> {
        let curve = Self {
            y_max,
            y_min,
            inflection,
            slope,
        };
        curve.validate("logistic")?;
        Ok(curve)
    }

    pub fn validate(&self, name: &str) -> Result<(), ParamError> {
        let ok = self.y_max.is_finite()
            && self.y_min.is_finite()
            && self.y_max >= self.y_min
            && self.inflection > 0.0
            && self.slope > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ParamError::Invalid {
                key: name.to_string(),
                reason: format!("logistic curve requires y_max >= y_min, inflection > 0, slope > 0: {self:?}"),
            })
        }
    }

    pub fn eval(&self, ratio: f64) -> f64 {
        let ratio = if ratio.is_nan() { ratio } else { ratio.max(0.0) };
        let scaled = (ratio / self.inflection).powf(self.slope);
        let y = self.y_max + (self.y_min - self.y_max) / (1.0 + scaled);
        y.clamp(self.y_min, self.y_max)
    }
}

/// `y = max(floor, y_f + (y_0 - y_f) * exp(-exp(alpha) * x))`, capped at `y_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzCurve {
    pub asymptote: f64,
    pub intercept: f64,
    pub growth: f64,
    pub floor: f64,
}

impl GompertzCurve {
    pub fn new(asymptote: f64, intercept: f64, growth: f64, floor: f64) -> Result<Self, ParamError> {
        let curve = Self {
            asymptote,
            intercept,
            growth,
            floor,
        };
        curve.validate("gompertz")?;
        Ok(curve)
    }

    pub fn validate(&self, name: &str) -> Result<(), ParamError> {
        let ok = self.asymptote.is_finite()
            && self.intercept.is_finite()
            && self.growth.is_finite()
            && self.asymptote > self.floor
            && self.intercept <= self.asymptote;
        if ok {
            Ok(())
        } else {
            Err(ParamError::Invalid {
                key: name.to_string(),
                reason: format!("gompertz curve requires intercept <= asymptote > floor: {self:?}"),
            })
        }
    }

    /// Raw curve value before clamping.
    pub fn raw(&self, x: f64) -> f64 {
        self.asymptote + (self.intercept - self.asymptote) * (-self.growth.exp() * x).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = if x.is_nan() { x } else { x.max(0.0) };
        self.raw(x).clamp(self.floor, self.asymptote)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mortgage_curve() -> LogisticCurve {
        LogisticCurve::new(3.0, 1.0, 1.5, 10.0).unwrap()
    }

    fn stress_curve() -> GompertzCurve {
        GompertzCurve::new(3.0, -108.2, 1.4, 1.0).unwrap()
    }

    #[test]
    fn logistic_limits_and_midpoint() {
        let c = mortgage_curve();
        assert_eq!(c.eval(0.0), 1.0);
        assert_abs_diff_eq!(c.eval(1.5), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(1e6), 3.0, epsilon = 1e-12);
        assert_eq!(c.eval(f64::INFINITY), 3.0);
    }

    #[test]
    fn logistic_direct_evaluation() {
        // 2 + (1 - 2) / (1 + (1/1.5)^5)
        let c = LogisticCurve::new(2.0, 1.0, 1.5, 5.0).unwrap();
        let expected = 2.0 - 1.0 / (1.0 + (1.0f64 / 1.5).powi(5));
        assert_abs_diff_eq!(c.eval(1.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(1.0), 1.1164, epsilon = 5e-5);
        // M/I_L = 3.0 on the mortgage curve
        assert_abs_diff_eq!(mortgage_curve().eval(3.0), 2.998, epsilon = 5e-4);
    }

    #[test]
    fn gompertz_values() {
        let c = stress_curve();
        assert_eq!(c.eval(0.0), 1.0);
        // 3 - 111.2 exp(-e^1.4 x)
        let direct = |x: f64| 3.0 - 111.2 * (-(1.4f64.exp()) * x).exp();
        assert_abs_diff_eq!(c.eval(1.0), direct(1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(2.0), direct(2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(1.0), 1.074, epsilon = 2e-3);
        assert_abs_diff_eq!(c.eval(2.0), 2.967, epsilon = 1e-3);
        assert_eq!(c.eval(50.0), 3.0);
    }

    #[test]
    fn rejects_inconsistent_curves() {
        assert!(LogisticCurve::new(1.0, 2.0, 1.5, 10.0).is_err());
        assert!(LogisticCurve::new(3.0, 1.0, 0.0, 10.0).is_err());
        assert!(LogisticCurve::new(3.0, 1.0, 1.5, -1.0).is_err());
        assert!(GompertzCurve::new(1.0, -108.2, 1.4, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn logistic_contained_and_monotone(mut xs in proptest::collection::vec(0.0f64..100.0, 2..64)) {
            let c = mortgage_curve();
            xs.sort_by(f64::total_cmp);
            let ys: Vec<f64> = xs.iter().map(|&x| c.eval(x)).collect();
            for w in ys.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for y in ys {
                prop_assert!((1.0..=3.0).contains(&y));
            }
        }

        #[test]
        fn gompertz_contained_and_monotone(mut xs in proptest::collection::vec(0.0f64..100.0, 2..64)) {
            let c = stress_curve();
            xs.sort_by(f64::total_cmp);
            let ys: Vec<f64> = xs.iter().map(|&x| c.eval(x)).collect();
            for w in ys.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for y in ys {
                prop_assert!((1.0..=3.0).contains(&y));
            }
        }
    }
}
