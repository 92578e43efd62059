//! Extreme-condition tests: the model must stay finite and non-negative and
//! respond in the expected direction when inputs are pushed to limits.

use serde::Serialize;

use crate::engine::SimClock;
use crate::error::Result;
use crate::model::{HousingStocks, ModelParams};
use crate::scenarios::{run_scenario, RunResult, Scenario, ScenarioSet};

use super::invariants::check_run;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremeCase {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn case(name: &'static str, outcome: Result<Vec<String>>) -> ExtremeCase {
    match outcome {
        Ok(problems) if problems.is_empty() => ExtremeCase {
            name,
            passed: true,
            detail: "ok".into(),
        },
        Ok(problems) => ExtremeCase {
            name,
            passed: false,
            detail: problems.join("; "),
        },
        Err(e) => ExtremeCase {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn run_with(scenario: &Scenario, params: &ModelParams, clock: &SimClock, edits: &[(&str, f64)]) -> Result<RunResult> {
    let mut p = params.clone();
    for (k, v) in edits {
        p.set(k, *v)?;
    }
    run_scenario(scenario, &p, clock)
}

fn require(problems: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        problems.push(what());
    }
}

/// Runs the battery against `params`. Scenarios are taken from `set`, which
/// must define `run1`, `run2` and `run3`.
pub fn extreme_conditions(params: &ModelParams, set: &ScenarioSet, clock: &SimClock) -> Result<Vec<ExtremeCase>> {
    let run1 = set.get("run1")?;
    let run2 = set.get("run2")?;
    let run3 = set.get("run3")?;
    let mut cases = Vec::new();

    cases.push(case(
        "covid_magnitude_zero_matches_baseline",
        (|| {
            let base = run_scenario(run1, params, clock)?;
            let shocked = run_with(run2, params, clock, &[("covid.magnitude", 0.0)])?;
            let mut problems = check_run(&shocked);
            let same = base
                .trajectory
                .states
                .iter()
                .zip(&shocked.trajectory.states)
                .all(|(a, b)| a.values() == b.values());
            require(&mut problems, same, || {
                "trajectory differs from the no-shock run".into()
            });
            Ok(problems)
        })(),
    ));

    cases.push(case(
        "covid_magnitude_one_stays_bounded",
        (|| {
            let normal = run_scenario(run2, params, clock)?;
            let total = run_with(run2, params, clock, &[("covid.magnitude", 1.0)])?;
            let mut problems = check_run(&total);
            require(
                &mut problems,
                total.metrics.peak_arrears > normal.metrics.peak_arrears,
                || "losing all income did not raise peak arrears".into(),
            );
            Ok(problems)
        })(),
    ));

    cases.push(case(
        "zero_income_saturates_rent_delay",
        (|| {
            let r = run_with(run1, params, clock, &[("rent.avg_household_income", 0.0)])?;
            let mut problems = check_run(&r);
            let ceiling = r.params.curves.rent_delay.asymptote.max(1.0);
            let saturated = r
                .trajectory
                .records
                .iter()
                .all(|x| (x.rent_delay_effect - ceiling).abs() < 1e-9);
            require(&mut problems, saturated, || {
                format!("rent delay effect not pinned at {ceiling}")
            });
            let start = HousingStocks::from_state(&r.trajectory.states[0]).rent_due;
            require(&mut problems, r.metrics.arrears_at_end > start, || {
                "arrears did not grow".into()
            });
            Ok(problems)
        })(),
    ));

    cases.push(case(
        "no_rental_stock",
        (|| {
            let r = run_with(
                run2,
                params,
                clock,
                &[
                    ("initial.units_occupied", 0.0),
                    ("initial.units_pending", 0.0),
                    ("initial.units_unoccupied", 0.0),
                    ("initial.units_foreclosed", 0.0),
                    ("initial.rent_due", 0.0),
                ],
            )?;
            let mut problems = check_run(&r);
            let no_units = r
                .trajectory
                .states
                .iter()
                .all(|s| HousingStocks::from_state(s).total_units() == 0.0);
            require(&mut problems, no_units, || "units appeared from nowhere".into());
            let quiet = r
                .trajectory
                .records
                .iter()
                .all(|x| x.filings == 0.0 && x.rent_due_new == 0.0);
            require(&mut problems, quiet, || "filings or rent bills without units".into());
            Ok(problems)
        })(),
    ));

    cases.push(case(
        "zero_landlord_tolerance_is_limited",
        (|| {
            let base = run_scenario(run1, params, clock)?;
            let r = run_with(run1, params, clock, &[("landlord.landlord_tolerance", 1e-6)])?;
            let mut problems = check_run(&r);
            require(
                &mut problems,
                r.metrics.total_filings > base.metrics.total_filings,
                || "filings did not rise".into(),
            );
            Ok(problems)
        })(),
    ));

    cases.push(case(
        "full_moratorium_stops_processing",
        (|| {
            let r = run_with(run3, params, clock, &[("moratorium.effect_size", 1.0)])?;
            let mut problems = check_run(&r);
            let m = &r.params.moratorium;
            let (start, end) = (m.start_time, m.start_time + m.duration);
            let leaked: f64 = r
                .trajectory
                .times
                .iter()
                .zip(&r.trajectory.records)
                .filter(|(t, _)| **t >= start && **t < end)
                .map(|(_, x)| x.processed)
                .sum();
            require(&mut problems, leaked == 0.0, || {
                format!("{leaked} evictions processed during the ban")
            });
            Ok(problems)
        })(),
    ));

    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSet;

    #[test]
    fn shipped_parameters_pass_the_battery() {
        let cases = extreme_conditions(
            &ParamSet::builtin().params,
            &ScenarioSet::builtin(),
            &SimClock::default(),
        )
        .unwrap();
        assert_eq!(cases.len(), 6);
        for c in &cases {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
