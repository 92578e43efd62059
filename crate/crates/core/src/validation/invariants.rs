//! Structural checks that must hold on every run, whatever the parameters.

use crate::model::{HousingStocks, ModelParams};
use crate::scenarios::RunResult;

const REL_TOL: f64 = 1e-9;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= REL_TOL * scale.abs().max(1.0)
}

/// Every violated invariant of `run`, described; empty when all hold.
///
/// Checked: finite non-negative stocks, effect values inside their curve
/// bounds, and per-step conservation of rental units, households and
/// assistance funds against their boundary flows.
pub fn check_run(run: &RunResult) -> Vec<String> {
    let mut out = Vec::new();
    let tr = &run.trajectory;
    let p = &run.params;
    let dt = tr.clock.dt;

    for (t, state) in tr.times.iter().zip(&tr.states) {
        for (spec, v) in state.layout().iter().zip(state.values()) {
            if !v.is_finite() || (spec.non_negative && *v < 0.0) {
                out.push(format!("stock {} = {v} at t = {t}", spec.name));
            }
        }
    }

    let bounds = effect_bounds(p);
    for (t, r) in tr.times.iter().zip(&tr.records) {
        for (name, value, (lo, hi)) in [
            ("E_r", r.rent_delay_effect, bounds.rent_delay),
            ("E_es", r.stress_effect, bounds.stress),
            ("E_m", r.mortgage_effect, bounds.mortgage),
            ("E_cr", r.crowding_effect, bounds.crowding),
        ] {
            if !(value >= lo - 1e-12 && value <= hi + 1e-12) {
                out.push(format!("{name} = {value} outside [{lo}, {hi}] at t = {t}"));
            }
        }
        if r.overdue_effect.is_nan() || r.overdue_effect < 1.0 {
            out.push(format!("E_or = {} below 1 at t = {t}", r.overdue_effect));
        }
    }

    // Conservation holds step by step: each Euler update changes the unit
    // and household totals only by boundary flows.
    let stocks: Vec<HousingStocks> = tr.states.iter().map(HousingStocks::from_state).collect();
    for (k, pair) in stocks.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let r = &tr.records[k];
        let t = tr.times[k];
        let units = a.total_units() - r.decline * dt;
        if !close(b.total_units(), units, a.total_units()) {
            out.push(format!(
                "rental units not conserved at t = {t}: {} vs {units}",
                b.total_units()
            ));
        }
        let net = r.new_insecure + r.new_homeless - r.stabilizing_insecure - r.stabilizing_homeless;
        let households = a.total_households() + net * dt;
        if !close(b.total_households(), households, a.total_households()) {
            out.push(format!(
                "households not conserved at t = {t}: {} vs {households}",
                b.total_households()
            ));
        }
        let funds = a.era_funds - r.era_payment * dt;
        if !close(b.era_funds, funds, a.era_funds) {
            out.push(format!(
                "assistance not conserved at t = {t}: {} vs {funds}",
                b.era_funds
            ));
        }
    }
    out
}

struct EffectBounds {
    rent_delay: (f64, f64),
    stress: (f64, f64),
    mortgage: (f64, f64),
    crowding: (f64, f64),
}

fn effect_bounds(p: &ModelParams) -> EffectBounds {
    let c = &p.curves;
    EffectBounds {
        rent_delay: (1.0, c.rent_delay.asymptote.max(1.0)),
        stress: (c.stress.floor, c.stress.asymptote),
        mortgage: (c.mortgage_delay.y_min, c.mortgage_delay.y_max),
        crowding: (c.crowding.y_min.min(1.0), c.crowding.y_max.max(1.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimClock;
    use crate::model::ParamSet;
    use crate::scenarios::{run_all, ScenarioSet};

    #[test]
    fn shipped_runs_satisfy_every_invariant() {
        let runs = run_all(
            &ScenarioSet::builtin(),
            &ParamSet::builtin().params,
            &SimClock::default(),
        )
        .unwrap();
        for run in &runs {
            let v = check_run(run);
            assert!(v.is_empty(), "{}: {v:?}", run.name());
        }
    }

    #[test]
    fn tampering_is_detected() {
        let runs = run_all(
            &ScenarioSet::builtin(),
            &ParamSet::builtin().params,
            &SimClock::default(),
        )
        .unwrap();
        let mut run = runs[3].clone();
        let last = run.trajectory.states.len() - 1;
        let v = run.trajectory.states[last].get(2);
        run.trajectory.states[last].set(2, v + 1000.0);
        let v = run.trajectory.states[last].get(8);
        run.trajectory.states[last].set(8, v + 1e6);
        run.trajectory.records[5].stress_effect = 0.5;
        let found = check_run(&run);
        assert!(found.iter().any(|m| m.contains("rental units")), "{found:?}");
        assert!(found.iter().any(|m| m.contains("assistance")), "{found:?}");
        assert!(found.iter().any(|m| m.contains("E_es")), "{found:?}");
    }
}
