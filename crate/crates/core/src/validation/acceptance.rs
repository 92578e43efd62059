//! The acceptance gate: headline reproduction checks plus the property
//! suite, each reported as one pass/fail criterion.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::SimClock;
use crate::error::Result;
use crate::model::{HousingModel, HousingStocks, ModelParams, ParamSet};
use crate::scenarios::{run_all, run_scenario, Headline, RunResult, ScenarioSet};

use super::calibrate::{calibrate, CalibrationSpec};
use super::extreme::{extreme_conditions, ExtremeCase};
use super::invariants::check_run;
use super::sensitivity::{sensitivity_sweep, SensitivityReport};
use super::theil::theils_u;

pub const SWEEP_DELTA: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceReport {
    pub headline: Headline,
    pub criteria: Vec<Criterion>,
    pub sweeps: Vec<SensitivityReport>,
    pub extreme: Vec<ExtremeCase>,
    #[serde(skip)]
    pub runs: Vec<RunResult>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn criterion(id: &'static str, name: &'static str, passed: bool, detail: String) -> Criterion {
    Criterion {
        id,
        name,
        passed,
        detail,
    }
}

/// Runs every scenario, the full sweep on each, the extreme battery, the
/// dt-halving comparison and the random-input property checks. `seed`
/// drives the random inputs only.
pub fn evaluate(params: &ParamSet, scenarios: &ScenarioSet, clock: &SimClock, seed: u64) -> Result<AcceptanceReport> {
    let p = &params.params;
    let started = Instant::now();
    run_scenario(scenarios.get("run2")?, p, clock)?;
    let single_secs = started.elapsed().as_secs_f64();

    let runs = run_all(scenarios, p, clock)?;
    let h = Headline::from_results(&runs)?;
    let find = |name: &str| {
        runs.iter()
            .find(|r| r.name() == name)
            .expect("headline found every run")
    };
    let mut criteria = Vec::new();

    criteria.push(criterion(
        "1",
        "moratorium cuts Run 3 evictions 51% +- 5 pp below Run 2",
        within(h.moratorium_reduction_pct, 51.0, 5.0) && single_secs < 10.0,
        format!(
            "{:.2}% reduction; single run {} 10 s",
            h.moratorium_reduction_pct,
            if single_secs < 10.0 { "under" } else { "over" }
        ),
    ));

    let arrears_ok = within(h.run2_arrears_at_mark, 20.4e9, 0.15 * 20.4e9);
    let excess_ok = within(h.excess_evictions, 1.5e6, 0.15 * 1.5e6);
    let increase_ok = h.eviction_increase_pct >= 25.0;
    let crowd_ok = within(h.crowding_increase_pct, 45.0, 10.0);
    let homeless_ok = within(h.homeless_increase_pct, 120.0, 20.0);
    criteria.push(criterion(
        "2",
        "Run 2 arrears, excess evictions, crowding and homelessness",
        arrears_ok && excess_ok && increase_ok && crowd_ok && homeless_ok,
        format!(
            "arrears ${:.2}B at month 36 ({}); excess {:.3}M ({}); evictions +{:.1}% ({}); crowding +{:.1}% ({}); homeless +{:.1}% ({})",
            h.run2_arrears_at_mark / 1e9,
            ok(arrears_ok),
            h.excess_evictions / 1e6,
            ok(excess_ok),
            h.eviction_increase_pct,
            ok(increase_ok),
            h.crowding_increase_pct,
            ok(crowd_ok),
            h.homeless_increase_pct,
            ok(homeless_ok)
        ),
    ));

    criteria.push(criterion(
        "3",
        "Run 3 arrears at end of window >= $18B",
        h.run3_arrears_at_end >= 18e9,
        format!("${:.2}B", h.run3_arrears_at_end / 1e9),
    ));

    let share_ok = within(h.run4_era_share_at_checkpoint, 42.0, 3.0);
    let faster_ok = h.run4a_arrears_at_end < h.run4_arrears_at_end;
    let exhausted_ok = h.run4a_era_exhausted_at.is_some_and(|t| t < clock.horizon);
    criteria.push(criterion(
        "4",
        "ERA pacing: 42% +- 3 pp paid by Feb 2022; faster ERA lowers arrears and runs out",
        share_ok && faster_ok && exhausted_ok,
        format!(
            "{:.1}% paid ({}); Run 4a ${:.2}B vs Run 4 ${:.2}B ({}); Run 4a funds exhausted at {} ({})",
            h.run4_era_share_at_checkpoint,
            ok(share_ok),
            h.run4a_arrears_at_end / 1e9,
            h.run4_arrears_at_end / 1e9,
            ok(faster_ok),
            h.run4a_era_exhausted_at
                .map_or("never".to_string(), |t| format!("t = {t}")),
            ok(exhausted_ok)
        ),
    ));

    criteria.push(processing_fraction(find("run1")));

    let theil = theil_property(seed);
    let bounds = effect_bounds_property(p, seed)?;
    let mut properties = vec![bounds, theil];

    let conservation: Vec<String> = runs
        .iter()
        .flat_map(|r| check_run(r).into_iter().map(move |v| format!("{}: {v}", r.name())))
        .collect();
    properties.push(criterion(
        "6c",
        "conservation, non-negativity and effect bounds on every run",
        conservation.is_empty(),
        summarize(&conservation, &format!("{} runs clean", runs.len())),
    ));

    let sweeps = scenarios
        .scenarios
        .iter()
        .map(|s| sensitivity_sweep(p, s, clock, SWEEP_DELTA))
        .collect::<Result<Vec<_>>>()?;
    let sweep_runs: usize = sweeps.iter().map(SensitivityReport::runs).sum();
    let sweep_flags: Vec<String> = sweeps
        .iter()
        .flat_map(|r| {
            r.violations()
                .into_iter()
                .map(move |(k, d, v)| format!("{} {k} {d}: {v}", r.scenario))
        })
        .collect();
    properties.push(criterion(
        "6d",
        "invariants hold across the +-15% sweep of every scenario",
        sweep_flags.is_empty(),
        summarize(&sweep_flags, &format!("{sweep_runs} perturbed runs clean")),
    ));

    properties.push(dt_halving(scenarios, p, clock, &h)?);
    properties.push(moratorium_window(find("run1"), find("run3")));
    properties.push(era_conservation(&runs));
    properties.push(self_consistency(params, clock)?);

    let extreme = extreme_conditions(p, scenarios, clock)?;
    let failed: Vec<String> = extreme
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    properties.push(criterion(
        "6i",
        "extreme-condition battery",
        failed.is_empty(),
        summarize(&failed, &format!("{} cases pass", extreme.len())),
    ));

    criteria.extend(properties);
    Ok(AcceptanceReport {
        headline: h,
        criteria,
        sweeps,
        extreme,
        runs,
    })
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "out of range"
    }
}

fn summarize(problems: &[String], clean: &str) -> String {
    match problems.len() {
        0 => clean.to_string(),
        n => format!("{n} problems, first: {}", problems[0]),
    }
}

fn processing_fraction(run1: &RunResult) -> Criterion {
    let e = &run1.params.eviction;
    let worst = run1
        .trajectory
        .states
        .iter()
        .zip(&run1.trajectory.records)
        .map(|(s, r)| {
            let expected = 0.38 / e.at_process * HousingStocks::from_state(s).units_pending;
            (r.processed - expected).abs() / expected.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    criterion(
        "5",
        "pre-pandemic processing equals 0.38 / AT_proc * U_pend",
        worst <= 1e-9 && e.proc_proportion == 0.38,
        format!("max relative deviation {worst:.2e}"),
    )
}

fn theil_property(seed: u64) -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut bad_u = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..50);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let o: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let (Ok(a), Ok(b)) = (theils_u(&s, &o), theils_u(&o, &s)) else {
            bad_u += 1;
            continue;
        };
        if a.mse > 0.0 {
            worst = worst.max((a.decomposition_sum() - 1.0).abs());
        }
        if !(0.0..=1.0).contains(&a.u) || (a.u - b.u).abs() > 1e-12 {
            bad_u += 1;
        }
    }
    criterion(
        "6b",
        "Theil shares sum to 1 on 1000 random pairs",
        worst <= 1e-9 && bad_u == 0,
        format!("max |sum - 1| = {worst:.2e}; {bad_u} pairs with U out of range or asymmetric"),
    )
}

/// Random states and times pushed through the full flow evaluation with
/// every policy on.
fn effect_bounds_property(params: &ModelParams, seed: u64) -> Result<Criterion> {
    let mut p = params.clone();
    p.switches.covid = true;
    p.switches.moratorium = true;
    p.switches.era = true;
    let model = HousingModel::new(p);
    let init = HousingStocks::initial(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let scale = |v: f64, rng: &mut ChaCha8Rng| v.max(1.0) * rng.gen_range(0.0..4.0);
    let mut failures = Vec::new();
    for _ in 0..10_000 {
        let s = HousingStocks {
            rent_due: scale(init.rent_due, &mut rng),
            mortgage_due: scale(init.mortgage_due, &mut rng),
            units_occupied: scale(init.units_occupied, &mut rng),
            units_pending: scale(init.units_pending, &mut rng),
            units_unoccupied: scale(init.units_unoccupied, &mut rng),
            units_foreclosed: scale(init.units_foreclosed, &mut rng),
            households_insecure: scale(init.households_insecure, &mut rng),
            households_homeless: scale(init.households_homeless, &mut rng),
            era_funds: scale(init.era_funds, &mut rng),
            covid_smooth: rng.gen_range(0.0..1.0),
            filing_smooth: rng.gen_range(0.0..1.0),
        };
        let t = rng.gen_range(0.0..50.0);
        let (_, r, _) = model.flows(&s, t, 0.25);
        let checks = [
            ("E_or", r.overdue_effect, 1.0, f64::INFINITY),
            ("E_es", r.stress_effect, 1.0, 3.0),
            ("E_m", r.mortgage_effect, 1.0, 3.0),
            ("E_cr", r.crowding_effect, 1.0, 2.0),
            ("E_r", r.rent_delay_effect, 1.0, 3.0),
        ];
        for (name, v, lo, hi) in checks {
            if !(v >= lo && v <= hi) {
                failures.push(format!("{name} = {v} at t = {t}"));
            }
        }
    }
    Ok(criterion(
        "6a",
        "effect bounds on 10^4 random inputs",
        failures.is_empty(),
        summarize(&failures, "all within bounds"),
    ))
}

fn dt_halving(scenarios: &ScenarioSet, params: &ModelParams, clock: &SimClock, h: &Headline) -> Result<Criterion> {
    let fine = clock.with_dt(clock.dt / 2.0)?;
    let runs = run_all(scenarios, params, &fine)?;
    let hf = Headline::from_results(&runs)?;
    let (worst, metric) = h
        .entries()
        .into_iter()
        .zip(hf.entries())
        .map(|((name, a), (_, b))| ((b - a).abs() / a.abs().max(f64::MIN_POSITIVE), name))
        .fold((0.0, ""), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(criterion(
        "6e",
        "halving dt changes headline metrics < 2%",
        worst < 0.02,
        format!("largest change {:.3}% ({metric})", 100.0 * worst),
    ))
}

/// During the moratorium the processed share of pending cases must stay at
/// or below 10% of its pre-shock value.
fn moratorium_window(run1: &RunResult, run3: &RunResult) -> Criterion {
    let m = &run3.params.moratorium;
    let (start, end) = (m.start_time, m.start_time + m.duration);
    let base = run1.params.eviction.proc_proportion / run1.params.eviction.at_process;
    let worst = run3
        .trajectory
        .times
        .iter()
        .zip(&run3.trajectory.states)
        .zip(&run3.trajectory.records)
        .filter(|((t, _), _)| **t >= start && **t < end)
        .map(|((_, s), r)| {
            let pending = HousingStocks::from_state(s).units_pending;
            if pending > 0.0 {
                r.processed / pending / base
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    criterion(
        "6f",
        "moratorium holds processing at <= 10% of baseline",
        worst <= 0.1 + 1e-12,
        format!("peak processed share {:.2}% of baseline", 100.0 * worst),
    )
}

fn era_conservation(runs: &[RunResult]) -> Criterion {
    let mut worst: f64 = 0.0;
    for r in runs.iter().filter(|r| r.params.switches.era) {
        let allocated = r.params.era.total_funds;
        let m = &r.metrics;
        worst = worst.max((m.era_disbursed + m.era_remaining - allocated).abs() / allocated);
        let paid: f64 = r.trajectory.records[..r.trajectory.records.len() - 1]
            .iter()
            .map(|x| x.era_payment)
            .sum::<f64>()
            * r.trajectory.clock.dt;
        worst = worst.max((paid - m.era_disbursed).abs() / allocated);
    }
    criterion(
        "6g",
        "ERA disbursed + remaining = allocated",
        worst <= 1e-6,
        format!("max relative error {worst:.2e}"),
    )
}

/// Plants a COVID magnitude, generates the Run 2 arrears it implies, then
/// recovers it by calibration from the shipped value.
fn self_consistency(params: &ParamSet, clock: &SimClock) -> Result<Criterion> {
    let planted = 0.42;
    let set =
        ScenarioSet::from_toml_str("[[scenario]]\nname = 'run2'\ncovid = true\nmoratorium = false\nera = false\n")?;
    let mut p = params.params.clone();
    p.covid.magnitude = planted;
    let target = run_all(&set, &p, clock)?[0].metrics.arrears_at_mark;
    let spec = CalibrationSpec::from_toml_str(&format!(
        "seed = 1\nbudget = 200\n\
         [[free]]\nkey = 'covid.magnitude'\nlower = 0.2\nupper = 0.7\n\
         [[target]]\nmetric = 'run2.arrears_at_mark'\nvalue = {target}\nscale = {}\n",
        target * 0.01
    ))?;
    let fit = calibrate(&spec, params, &set, clock)?;
    let got = fit.params.params.covid.magnitude;
    let err = (got - planted).abs() / planted;
    Ok(criterion(
        "6h",
        "calibration recovers a planted parameter within 1%",
        err < 0.01,
        format!("planted {planted}, recovered {got:.6} ({:.4}% off)", 100.0 * err),
    ))
}
