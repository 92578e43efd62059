//! Policy scenarios (Runs 1 to 4a), their execution and comparison metrics.

mod metrics;
mod series;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{DiagnosticKind, SimClock};
use crate::error::{Error, Result};
use crate::model::{HousingModel, HousingTrajectory, ModelParams};

pub use metrics::{compare, Comparison, Headline, MetricDelta, MetricSet, ERA_CHECKPOINT, SHOCK_MARK};
pub use series::{emit_timeseries, series_names, TimeSeriesTable};

/// The scenario file shipped with the repository.
pub const DEFAULT_SCENARIOS_TOML: &str = include_str!("../../../../scenarios/runs.toml");

fn default_multiplier() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub covid: bool,
    pub moratorium: bool,
    pub era: bool,
    #[serde(default = "default_multiplier")]
    pub era_rate_multiplier: f64,
    #[serde(default)]
    pub compare_to: Option<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl Scenario {
    /// A scenario with the given switches and no overrides.
    pub fn new(name: &str, covid: bool, moratorium: bool, era: bool) -> Self {
        Self {
            name: name.to_string(),
            description: String::new(),
            covid,
            moratorium,
            era,
            era_rate_multiplier: 1.0,
            compare_to: None,
            overrides: BTreeMap::new(),
        }
    }

    /// `params` with this scenario's switches and overrides applied, validated.
    pub fn apply(&self, params: &ModelParams) -> Result<ModelParams> {
        let mut p = params.clone();
        for (key, value) in &self.overrides {
            p.set(key, *value)?;
        }
        p.switches.covid = self.covid;
        p.switches.moratorium = self.moratorium;
        p.switches.era = self.era;
        p.switches.era_rate_multiplier = self.era_rate_multiplier;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_SCENARIOS_TOML).expect("shipped scenario file parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let set: ScenarioSet = toml::from_str(text).map_err(|e| Error::Validation(format!("scenario file: {e}")))?;
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            if s.name.is_empty() {
                return Err(Error::Validation("scenario name must not be empty".into()));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Validation(format!("duplicate scenario `{}`", s.name)));
            }
            if !(s.era_rate_multiplier > 0.0 && s.era_rate_multiplier.is_finite()) {
                return Err(Error::Validation(format!(
                    "scenario `{}`: era_rate_multiplier must be > 0",
                    s.name
                )));
            }
        }
        for s in &self.scenarios {
            if let Some(base) = &s.compare_to {
                if !seen.contains(base.as_str()) {
                    return Err(Error::Validation(format!(
                        "scenario `{}` compares to unknown scenario `{base}`",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.name.as_str()).collect()
    }
}

/// One executed scenario.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: Scenario,
    /// Parameters actually simulated (switches and overrides applied).
    pub params: ModelParams,
    pub trajectory: HousingTrajectory,
    pub metrics: MetricSet,
}

impl RunResult {
    pub fn name(&self) -> &str {
        &self.scenario.name
    }
}

/// Runs one scenario. Deterministic: identical inputs give bit-identical
/// trajectories. A stock clamp means a flow escaped its limiter and is
/// reported as an error.
pub fn run_scenario(scenario: &Scenario, params: &ModelParams, clock: &SimClock) -> Result<RunResult> {
    let wrap = |e: Error| e.in_scenario(&scenario.name);
    let p = scenario.apply(params).map_err(wrap)?;
    let model = HousingModel::new(p);
    let trajectory = model.run(clock).map_err(|e| wrap(e.into()))?;
    if let Some(d) = trajectory.diagnostics.iter().find(|d| d.kind == DiagnosticKind::Clamp) {
        return Err(wrap(Error::Validation(format!(
            "stock {} went negative ({}) at t = {} and was clamped",
            d.subject, d.value, d.time
        ))));
    }
    let metrics = MetricSet::from_trajectory(&trajectory, &model.params);
    Ok(RunResult {
        scenario: scenario.clone(),
        params: model.params,
        trajectory,
        metrics,
    })
}

/// Runs every scenario in parallel; results come back in file order.
pub fn run_all(set: &ScenarioSet, params: &ModelParams, clock: &SimClock) -> Result<Vec<RunResult>> {
    set.scenarios
        .par_iter()
        .map(|s| run_scenario(s, params, clock))
        .collect()
}

/// Comparison of each run against its `compare_to` baseline, in file order.
pub fn compare_all(results: &[RunResult]) -> Result<Vec<Comparison>> {
    results
        .iter()
        .filter_map(|r| r.scenario.compare_to.as_deref().map(|b| (b, r)))
        .map(|(base, variant)| {
            let baseline = results
                .iter()
                .find(|r| r.name() == base)
                .ok_or_else(|| Error::UnknownScenario(base.to_string()))?;
            compare(baseline, variant)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSet;

    #[test]
    fn builtin_file_defines_the_five_runs() {
        let set = ScenarioSet::builtin();
        assert_eq!(set.names(), ["run1", "run2", "run3", "run4", "run4a"]);
        let run4a = set.get("run4a").unwrap();
        assert!(run4a.covid && run4a.moratorium && run4a.era);
        assert!(run4a.era_rate_multiplier > 1.0);
        let run1 = set.get("run1").unwrap();
        assert!(!run1.covid && !run1.moratorium && !run1.era);
    }

    #[test]
    fn bad_scenario_files_are_rejected() {
        let dup = "[[scenario]]\nname='a'\ncovid=false\nmoratorium=false\nera=false\n\
                   [[scenario]]\nname='a'\ncovid=false\nmoratorium=false\nera=false\n";
        assert!(ScenarioSet::from_toml_str(dup).is_err());
        let dangling = "[[scenario]]\nname='a'\ncovid=false\nmoratorium=false\nera=false\ncompare_to='b'\n";
        assert!(ScenarioSet::from_toml_str(dangling).is_err());
        let typo = "[[scenario]]\nname='a'\ncovid=false\nmoratorium=false\nera=false\ncovd=true\n";
        assert!(ScenarioSet::from_toml_str(typo).is_err());
        assert!(matches!(
            ScenarioSet::builtin().get("run9"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let params = ParamSet::builtin().params;
        let mut s = Scenario::new("x", true, false, false);
        s.overrides.insert("covid.magnitude".into(), 0.2);
        assert_eq!(s.apply(&params).unwrap().covid.magnitude, 0.2);
        s.overrides.insert("covid.nothing".into(), 0.2);
        assert!(s.apply(&params).is_err());
    }

    #[test]
    fn runs_are_bit_identical() {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run4").unwrap().clone();
        let clock = SimClock::default();
        let a = run_scenario(&s, &params, &clock).unwrap();
        let b = run_scenario(&s, &params, &clock).unwrap();
        for (x, y) in a.trajectory.states.iter().zip(&b.trajectory.states) {
            let xb: Vec<u64> = x.values().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        assert_eq!(a.trajectory.len(), clock.steps() + 1);
    }

    #[test]
    fn errors_name_the_scenario() {
        let params = ParamSet::builtin().params;
        let mut s = Scenario::new("broken", true, false, false);
        s.overrides.insert("eviction.at_process".into(), -1.0);
        let err = run_scenario(&s, &params, &SimClock::default()).unwrap_err();
        assert!(err.to_string().contains("broken"), "{err}");
    }
}
