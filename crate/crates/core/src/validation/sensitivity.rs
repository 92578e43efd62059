//! One-at-a-time parameter sensitivity.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::SimClock;
use crate::error::Result;
use crate::model::params::{ParamKind, PARAM_DEFS};
use crate::model::ModelParams;
use crate::scenarios::{run_scenario, MetricSet, Scenario};

use super::invariants::check_run;

/// Metrics elasticities are reported for.
pub const SENSITIVITY_METRICS: &[&str] = &[
    "total_evictions",
    "arrears_at_end",
    "crowding_at_end",
    "homeless_at_end",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedRun {
    pub value: f64,
    /// The perturbation was cut back to keep a share inside [0, 1].
    pub capped: bool,
    pub metrics: Option<MetricSet>,
    /// Failed invariants or the error that stopped the run.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSensitivity {
    pub key: &'static str,
    pub base_value: f64,
    pub low: PerturbedRun,
    pub high: PerturbedRun,
    /// Arc elasticity per metric; `None` when it is undefined (zero base
    /// value or metric, or a failed run).
    pub elasticities: Vec<(&'static str, Option<f64>)>,
    pub max_abs_elasticity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub scenario: String,
    pub delta: f64,
    pub baseline: MetricSet,
    /// Most influential first.
    pub parameters: Vec<ParameterSensitivity>,
}

impl SensitivityReport {
    pub fn runs(&self) -> usize {
        2 * self.parameters.len()
    }

    /// `(parameter, direction, violation)` for every flagged run.
    pub fn violations(&self) -> Vec<(&'static str, &'static str, &str)> {
        self.parameters
            .iter()
            .flat_map(|p| {
                let low = p.low.violations.iter().map(move |v| (p.key, "low", v.as_str()));
                let high = p.high.violations.iter().map(move |v| (p.key, "high", v.as_str()));
                low.chain(high)
            })
            .collect()
    }
}

fn perturbed(
    base: &ModelParams,
    scenario: &Scenario,
    clock: &SimClock,
    key: &str,
    value: f64,
    capped: bool,
) -> PerturbedRun {
    let mut p = base.clone();
    p.set(key, value).expect("registry key");
    match run_scenario(scenario, &p, clock) {
        Ok(run) => PerturbedRun {
            value,
            capped,
            violations: check_run(&run),
            metrics: Some(run.metrics),
        },
        Err(e) => PerturbedRun {
            value,
            capped,
            metrics: None,
            violations: vec![e.to_string()],
        },
    }
}

/// Perturbs every parameter by `±delta` (relative) in turn and reruns
/// `scenario`, checking all invariants on each run. Shares are capped at 1.
/// A zero delta reruns the baseline, which is a determinism check.
/// Parameters at zero cannot move and get no elasticity.
pub fn sensitivity_sweep(
    params: &ModelParams,
    scenario: &Scenario,
    clock: &SimClock,
    delta: f64,
) -> Result<SensitivityReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(crate::Error::Validation(format!(
            "sweep delta must lie in [0, 1), got {delta}"
        )));
    }
    let baseline = run_scenario(scenario, params, clock)?.metrics;
    let mut parameters: Vec<ParameterSensitivity> = PARAM_DEFS
        .par_iter()
        .map(|def| {
            let base_value = params.get(def.key).expect("registry key");
            let low_value = base_value * (1.0 - delta);
            let mut high_value = base_value * (1.0 + delta);
            let capped = def.kind == ParamKind::Fraction && high_value > 1.0;
            if capped {
                high_value = 1.0;
            }
            let low = perturbed(params, scenario, clock, def.key, low_value, false);
            let high = perturbed(params, scenario, clock, def.key, high_value, capped);
            let elasticities: Vec<(&'static str, Option<f64>)> = SENSITIVITY_METRICS
                .iter()
                .map(|&m| {
                    let b = baseline.get(m).expect("known metric");
                    let e = match (&low.metrics, &high.metrics) {
                        (Some(lo), Some(hi)) if base_value != 0.0 && b != 0.0 && high_value != low_value => {
                            let dm = hi.get(m).expect("known metric") - lo.get(m).expect("known metric");
                            Some(dm / b * base_value / (high_value - low_value))
                        }
                        _ => None,
                    };
                    (m, e)
                })
                .collect();
            let max_abs_elasticity = elasticities
                .iter()
                .filter_map(|(_, e)| e.map(f64::abs))
                .fold(0.0, f64::max);
            ParameterSensitivity {
                key: def.key,
                base_value,
                low,
                high,
                elasticities,
                max_abs_elasticity,
            }
        })
        .collect();
    parameters.sort_by(|a, b| {
        b.max_abs_elasticity
            .total_cmp(&a.max_abs_elasticity)
            .then(a.key.cmp(b.key))
    });
    Ok(SensitivityReport {
        scenario: scenario.name.clone(),
        delta,
        baseline,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSet;
    use crate::scenarios::ScenarioSet;

    #[test]
    fn covers_every_parameter_twice() {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run2").unwrap().clone();
        let r = sensitivity_sweep(&params, &s, &SimClock::default(), 0.15).unwrap();
        assert_eq!(r.parameters.len(), PARAM_DEFS.len());
        assert_eq!(r.runs(), 2 * PARAM_DEFS.len());
        for w in r.parameters.windows(2) {
            assert!(w[0].max_abs_elasticity >= w[1].max_abs_elasticity);
        }
        let covid = r.parameters.iter().find(|p| p.key == "covid.magnitude").unwrap();
        assert!(covid.max_abs_elasticity > 0.0);
        assert_eq!(covid.low.value, params.covid.magnitude * 0.85);
    }

    #[test]
    fn switched_off_policy_has_zero_elasticity() {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run1").unwrap().clone();
        let r = sensitivity_sweep(&params, &s, &SimClock::default(), 0.1).unwrap();
        let era = r.parameters.iter().find(|p| p.key == "era.total_funds").unwrap();
        assert!(era.elasticities.iter().all(|(_, e)| *e == Some(0.0)));
    }

    #[test]
    fn zero_delta_reproduces_the_baseline() {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run3").unwrap().clone();
        let r = sensitivity_sweep(&params, &s, &SimClock::default(), 0.0).unwrap();
        for p in &r.parameters {
            assert_eq!(p.low.metrics.as_ref(), Some(&r.baseline), "{}", p.key);
            assert_eq!(p.high.metrics.as_ref(), Some(&r.baseline), "{}", p.key);
        }
    }

    #[test]
    fn crowding_falls_as_the_reference_rises() {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run2").unwrap().clone();
        let r = sensitivity_sweep(&params, &s, &SimClock::default(), 0.15).unwrap();
        let c = r
            .parameters
            .iter()
            .find(|p| p.key == "households.crowding_reference")
            .unwrap();
        let lo = c.low.metrics.as_ref().unwrap().crowding_at_end;
        let hi = c.high.metrics.as_ref().unwrap().crowding_at_end;
        assert!(hi < r.baseline.crowding_at_end && r.baseline.crowding_at_end < lo);
    }

    #[test]
    fn bad_delta_is_rejected() {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run1").unwrap().clone();
        assert!(sensitivity_sweep(&params, &s, &SimClock::default(), -0.1).is_err());
        assert!(sensitivity_sweep(&params, &s, &SimClock::default(), 1.0).is_err());
    }
}
