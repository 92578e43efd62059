use housing_sd::engine::SimClock;
use housing_sd::model::{ModelParams, ParamSet};
use housing_sd::scenarios::{run_all, run_scenario, RunResult, Scenario, ScenarioSet};
use housing_sd::validation::{check_run, sensitivity_sweep};

fn shipped() -> (ModelParams, ScenarioSet, SimClock) {
    (ParamSet::builtin().params, ScenarioSet::builtin(), SimClock::default())
}

fn run(params: &ModelParams, scenario: &Scenario) -> RunResult {
    run_scenario(scenario, params, &SimClock::default()).unwrap()
}

#[test]
fn runs_agree_until_the_first_event() {
    let (p, set, clock) = shipped();
    let runs = run_all(&set, &p, &clock).unwrap();
    // Filings start falling half a month before the moratorium itself.
    let shock = p.covid.start_time.min(p.moratorium.start_time - 0.5);
    let base = &runs[0];
    for other in &runs[1..] {
        for (k, &t) in base.trajectory.times.iter().enumerate() {
            if t > shock {
                break;
            }
            // The assistance fund holds its allocation from the start.
            let strip = |r: &RunResult| {
                let state = &r.trajectory.states[k];
                let era = state.index_of("ERA").unwrap();
                let mut v = state.values().to_vec();
                v.remove(era);
                v
            };
            assert_eq!(
                strip(base),
                strip(other),
                "{} diverges from {} at t = {t}",
                other.name(),
                base.name()
            );
        }
    }
}

#[test]
fn each_policy_layer_lowers_evictions() {
    let (p, set, clock) = shipped();
    let runs = run_all(&set, &p, &clock).unwrap();
    let evictions = |name: &str| runs.iter().find(|r| r.name() == name).unwrap().metrics.total_evictions;
    assert!(evictions("run2") > evictions("run1"));
    assert!(evictions("run3") < evictions("run2"));
    assert!(evictions("run4") <= evictions("run3"));
}

// Completed evictions are left out: the shock also slows the courts, so past
// a point a larger shock moves evictions out of the window.
#[test]
fn larger_shocks_do_more_damage() {
    let (p, _, _) = shipped();
    let scenario = Scenario::new("shock", true, false, false);
    let mut previous: Option<RunResult> = None;
    for magnitude in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let mut q = p.clone();
        q.covid.magnitude = magnitude;
        let r = run(&q, &scenario);
        assert!(check_run(&r).is_empty());
        if let Some(prev) = &previous {
            let (a, b) = (&prev.metrics, &r.metrics);
            assert!(b.total_filings >= a.total_filings, "filings at M = {magnitude}");
            assert!(b.peak_arrears >= a.peak_arrears, "arrears at M = {magnitude}");
            assert!(b.peak_homeless >= a.peak_homeless, "homelessness at M = {magnitude}");
            assert!(b.crowding_at_end >= a.crowding_at_end, "crowding at M = {magnitude}");
        }
        previous = Some(r);
    }
}

#[test]
fn zero_shock_reproduces_the_baseline() {
    let (mut p, set, _) = shipped();
    let baseline = run(&p, set.get("run1").unwrap());
    p.covid.magnitude = 0.0;
    let shocked = run(&p, set.get("run2").unwrap());
    assert_eq!(
        baseline.trajectory.last_state().values(),
        shocked.trajectory.last_state().values()
    );
}

#[test]
fn scenario_files_with_overrides_load_and_run() {
    let text = r#"
        [[scenario]]
        name = "base"
        covid = true
        moratorium = false
        era = false

        [[scenario]]
        name = "longer"
        covid = true
        moratorium = true
        era = false
        compare_to = "base"
        overrides = { "moratorium.duration" = 24.0 }
    "#;
    let set = ScenarioSet::from_toml_str(text).unwrap();
    let (p, shipped_set, clock) = shipped();
    let runs = run_all(&set, &p, &clock).unwrap();
    assert_eq!(runs[1].params.moratorium.duration, 24.0);
    let standard = run(&p, shipped_set.get("run3").unwrap());
    assert!(runs[1].metrics.total_evictions < standard.metrics.total_evictions);

    let bad = text.replace("moratorium.duration", "moratorium.lenght");
    assert!(ScenarioSet::from_toml_str(&bad)
        .map(|s| run_all(&s, &p, &clock))
        .map_or(true, |r| r.is_err()));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (p, set, clock) = shipped();
    let a = run_all(&set, &p, &clock).unwrap();
    let b = run_all(&set, &p, &clock).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.trajectory.states, y.trajectory.states);
        assert_eq!(x.metrics, y.metrics);
    }
}

#[test]
fn occupied_stock_is_among_the_most_influential_parameters() {
    let (p, set, clock) = shipped();
    let report = sensitivity_sweep(&p, set.get("run2").unwrap(), &clock, 0.1).unwrap();
    let mut e: Vec<f64> = report.parameters.iter().map(|s| s.max_abs_elasticity).collect();
    e.sort_by(f64::total_cmp);
    let median = e[e.len() / 2];
    let units = report
        .parameters
        .iter()
        .find(|s| s.key == "initial.units_occupied")
        .unwrap();
    assert!(units.max_abs_elasticity > median);
    let rank = report
        .parameters
        .iter()
        .position(|s| s.key == "initial.units_occupied")
        .unwrap();
    assert!(rank < 10, "ranked {rank}");
}
