use housing_sd::engine::SimClock;
use housing_sd::model::params::{ParamKind, PARAM_DEFS};
use housing_sd::model::ParamSet;
use housing_sd::scenarios::{run_scenario, ScenarioSet};
use housing_sd::validation::check_run;
use proptest::prelude::*;

/// Multiplicative jitter for every level, rate and fraction parameter. Event
/// timing and curve shapes stay put.
fn jittered() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.7f64..1.3, PARAM_DEFS.len())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn stocks_are_conserved_and_bounded(factors in jittered(), scenario in 0usize..5) {
        let base = ParamSet::builtin().params;
        let mut p = base.clone();
        for (def, f) in PARAM_DEFS.iter().zip(&factors) {
            let v = base.get(def.key).unwrap();
            let value = match def.kind {
                ParamKind::Level | ParamKind::Positive => v * f,
                ParamKind::Fraction => (v * f).min(1.0),
                ParamKind::Timing | ParamKind::Shape => v,
            };
            p.set(def.key, value).unwrap();
        }
        prop_assume!(p.validate().is_ok());
        let set = ScenarioSet::builtin();
        let s = &set.scenarios[scenario];
        match run_scenario(s, &p, &SimClock::default()) {
            Ok(run) => {
                let violations = check_run(&run);
                prop_assert!(violations.is_empty(), "{}: {:?}", s.name, violations);
            }
            // A flow escaping its limiter is itself a failure.
            Err(e) => prop_assert!(false, "{}: {e}", s.name),
        }
    }
}
