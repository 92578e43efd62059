//! Bounded Nelder-Mead calibration against headline targets and reference
//! modes.
//!
//! Free parameters are searched in coordinates scaled to `[0, 1]` between
//! their bounds; trial points outside the box are projected back onto it.
//! The loss is a weighted sum of squared, scaled target residuals plus the
//! squared Theil U of each reference comparison. Runs that fail (invalid
//! parameters, stock clamps, infeasible equilibrium) score `FAILED_LOSS`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::SimClock;
use crate::error::{Error, Result};
use crate::model::equilibrium::{balance, EquilibriumTargets, SOLVED_KEYS};
use crate::model::params::param_def;
use crate::model::{ModelParams, ParamSet, Provenance};
use crate::scenarios::{run_all, Headline, RunResult, ScenarioSet};

use super::reference::ReferenceMode;

pub const FAILED_LOSS: f64 = 1e12;

fn default_budget() -> usize {
    2000
}

fn default_tolerance() -> f64 {
    1e-10
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    pub key: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Penalise any deviation.
    #[default]
    Equal,
    /// Penalise only shortfalls below the value.
    AtLeast,
    /// Penalise only excesses above the value.
    AtMost,
}

/// A metric to hit. `metric` is a headline name (see [`Headline`]) or
/// `<scenario>.<metric>` for a per-run metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricTarget {
    pub metric: String,
    pub value: f64,
    #[serde(default)]
    pub kind: TargetKind,
    /// Residual size counted as one unit of loss.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

impl MetricTarget {
    fn residual(&self, achieved: f64) -> f64 {
        let raw = achieved - self.value;
        let r = match self.kind {
            TargetKind::Equal => raw,
            TargetKind::AtLeast => raw.min(0.0),
            TargetKind::AtMost => raw.max(0.0),
        };
        r / self.scale
    }
}

/// A reference mode compared with one scenario. `file` is relative to the
/// spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTarget {
    pub scenario: String,
    pub file: PathBuf,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    #[serde(default)]
    pub seed: u64,
    /// Maximum loss evaluations.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Extra simplex restarts around the best point after convergence.
    #[serde(default)]
    pub restarts: usize,
    /// Convergence threshold on the loss spread across the simplex.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Re-solve the pre-shock equilibrium for these volumes at every point.
    #[serde(default)]
    pub rebalance: Option<EquilibriumTargets>,
    #[serde(default)]
    pub free: Vec<FreeParam>,
    #[serde(default, rename = "target")]
    pub targets: Vec<MetricTarget>,
    #[serde(default, rename = "reference")]
    pub references: Vec<ReferenceTarget>,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: default_budget(),
            restarts: 0,
            tolerance: default_tolerance(),
            rebalance: None,
            free: Vec::new(),
            targets: Vec::new(),
            references: Vec::new(),
        }
    }
}

impl CalibrationSpec {
    /// Loads a spec and resolves reference paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec =
            Self::from_toml_str(&text).map_err(|e| Error::Calibration(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for r in &mut spec.references {
            if r.file.is_relative() {
                r.file = dir.join(&r.file);
            }
        }
        Ok(spec)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Calibration(format!("calibration spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Calibration(m));
        for (i, f) in self.free.iter().enumerate() {
            if param_def(&f.key).is_none() {
                return bad(format!("unknown free parameter `{}`", f.key));
            }
            if self.free[..i].iter().any(|g| g.key == f.key) {
                return bad(format!("free parameter `{}` listed twice", f.key));
            }
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower < f.upper) {
                return bad(format!("infeasible bounds for `{}`: [{}, {}]", f.key, f.lower, f.upper));
            }
            if self.rebalance.is_some() && SOLVED_KEYS.contains(&f.key.as_str()) {
                return bad(format!("`{}` is solved by the equilibrium and cannot be free", f.key));
            }
        }
        for t in &self.targets {
            if !(t.value.is_finite() && t.scale > 0.0 && t.scale.is_finite() && t.weight >= 0.0) {
                return bad(format!(
                    "target `{}` needs finite value, scale > 0 and weight >= 0",
                    t.metric
                ));
            }
        }
        if self.references.iter().any(|r| r.weight.is_nan() || r.weight < 0.0) {
            return bad("reference weights must be >= 0".into());
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad("tolerance must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetOutcome {
    pub metric: String,
    pub kind: TargetKind,
    pub target: f64,
    pub achieved: f64,
    pub weighted_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceOutcomeFit {
    pub scenario: String,
    pub series: String,
    pub theil_u: f64,
    pub weighted_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedValue {
    pub key: String,
    pub initial: f64,
    pub fitted: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub evaluations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub converged: bool,
    pub warning: Option<String>,
    pub fitted: Vec<FittedValue>,
    pub targets: Vec<TargetOutcome>,
    pub references: Vec<ReferenceOutcomeFit>,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub params: ParamSet,
    pub report: CalibrationReport,
}

/// Everything needed to score one point.
struct Objective<'a> {
    spec: &'a CalibrationSpec,
    base: &'a ModelParams,
    scenarios: &'a ScenarioSet,
    clock: &'a SimClock,
    references: Vec<(String, ReferenceMode, f64)>,
}

struct Scored {
    loss: f64,
    targets: Vec<TargetOutcome>,
    references: Vec<ReferenceOutcomeFit>,
}

fn metric_value(metric: &str, runs: &[RunResult], headline: &Option<Headline>) -> Result<f64> {
    if let Some((scenario, name)) = metric.split_once('.') {
        let run = runs
            .iter()
            .find(|r| r.name() == scenario)
            .ok_or_else(|| Error::UnknownScenario(scenario.to_string()))?;
        return run
            .metrics
            .get(name)
            .ok_or_else(|| Error::Calibration(format!("unknown metric `{name}`")));
    }
    match headline {
        Some(h) => h
            .get(metric)
            .ok_or_else(|| Error::Calibration(format!("unknown headline metric `{metric}`"))),
        None => Err(Error::Calibration(format!(
            "headline metric `{metric}` needs runs run1 to run4a"
        ))),
    }
}

impl Objective<'_> {
    fn params_at(&self, x: &[f64]) -> Result<ModelParams> {
        let mut p = self.base.clone();
        for (f, xi) in self.spec.free.iter().zip(x) {
            p.set(&f.key, f.lower + (f.upper - f.lower) * xi.clamp(0.0, 1.0))?;
        }
        match self.spec.rebalance {
            Some(targets) => balance(&p, targets),
            None => Ok(p),
        }
    }

    fn try_score(&self, x: &[f64]) -> Result<Scored> {
        let p = self.params_at(x)?;
        let runs = run_all(self.scenarios, &p, self.clock)?;
        let headline = Headline::from_results(&runs).ok();
        let mut loss = 0.0;
        let mut targets = Vec::new();
        for t in &self.spec.targets {
            let achieved = metric_value(&t.metric, &runs, &headline)?;
            let weighted_loss = t.weight * t.residual(achieved).powi(2);
            loss += weighted_loss;
            targets.push(TargetOutcome {
                metric: t.metric.clone(),
                kind: t.kind,
                target: t.value,
                achieved,
                weighted_loss,
            });
        }
        let mut references = Vec::new();
        for (scenario, mode, weight) in &self.references {
            let run = runs
                .iter()
                .find(|r| r.name() == scenario)
                .ok_or_else(|| Error::UnknownScenario(scenario.clone()))?;
            let u = mode.compare(run)?.theil.u;
            let weighted_loss = weight * u * u;
            loss += weighted_loss;
            references.push(ReferenceOutcomeFit {
                scenario: scenario.clone(),
                series: mode.series.clone(),
                theil_u: u,
                weighted_loss,
            });
        }
        if !loss.is_finite() {
            return Err(Error::Calibration("non-finite loss".into()));
        }
        Ok(Scored {
            loss,
            targets,
            references,
        })
    }

    fn loss(&self, x: &[f64]) -> f64 {
        self.try_score(x).map_or(FAILED_LOSS, |s| s.loss)
    }
}

struct Simplex {
    points: Vec<(f64, Vec<f64>)>,
}

impl Simplex {
    fn sort(&mut self) {
        // Ties broken on coordinates so the order never depends on
        // evaluation scheduling.
        self.points.sort_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| {
                a.1.iter()
                    .zip(&b.1)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
    }

    fn spread(&self) -> f64 {
        let best = self.points[0].0;
        let worst = self.points[self.points.len() - 1].0;
        worst - best
    }

    fn diameter(&self) -> f64 {
        let best = &self.points[0].1;
        self.points
            .iter()
            .map(|(_, x)| x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

fn project(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Axis-aligned simplex of edge `step` around `x0`, stepping inward when a
/// bound is near.
fn initial_vertices(x0: &[f64], step: f64, signs: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut x = x0.to_vec();
        let mut d = step * signs[i];
        if !(0.0..=1.0).contains(&(x[i] + d)) {
            d = -d;
        }
        x[i] = (x[i] + d).clamp(0.0, 1.0);
        out.push(x);
    }
    out
}

/// Fits the free parameters of `spec`. Deterministic for a given spec,
/// parameter set, scenario set and clock.
pub fn calibrate(
    spec: &CalibrationSpec,
    params: &ParamSet,
    scenarios: &ScenarioSet,
    clock: &SimClock,
) -> Result<CalibrationResult> {
    spec.validate()?;
    let references = spec
        .references
        .iter()
        .map(|r| {
            scenarios.get(&r.scenario)?;
            Ok((r.scenario.clone(), ReferenceMode::load(&r.file)?, r.weight))
        })
        .collect::<Result<Vec<_>>>()?;
    let objective = Objective {
        spec,
        base: &params.params,
        scenarios,
        clock,
        references,
    };
    let n = spec.free.len();
    let x0: Vec<f64> = spec
        .free
        .iter()
        .map(|f| {
            let v = params.params.get(&f.key).expect("validated key");
            ((v - f.lower) / (f.upper - f.lower)).clamp(0.0, 1.0)
        })
        .collect();

    let initial = objective
        .try_score(&x0)
        .map_err(|e| Error::Calibration(format!("loss is not computable at the starting point: {e}")))?;
    let initial_loss = initial.loss;
    let mut evaluations = 1;
    let mut best = (initial_loss, x0.clone());
    let mut converged = n == 0;

    if n > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut step = 0.1;
        let mut signs = vec![1.0; n];
        for _ in 0..=spec.restarts {
            if evaluations >= spec.budget {
                break;
            }
            let vertices = initial_vertices(&best.1, step, &signs);
            let scored: Vec<(f64, Vec<f64>)> = vertices[1..]
                .par_iter()
                .map(|x| (objective.loss(x), x.clone()))
                .collect();
            evaluations += scored.len();
            let mut simplex = Simplex {
                points: std::iter::once(best.clone()).chain(scored).collect(),
            };
            let (done, used) = nelder_mead(
                &objective,
                &mut simplex,
                spec.budget.saturating_sub(evaluations),
                spec.tolerance,
            );
            evaluations += used;
            simplex.sort();
            if simplex.points[0].0 < best.0 {
                best = simplex.points[0].clone();
            }
            converged = done;
            // Restart smaller, with random orientation, to escape a
            // collapsed simplex.
            step *= 0.5;
            signs = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        }
    }

    let scored = if n == 0 { initial } else { objective.try_score(&best.1)? };
    let fitted_params = objective.params_at(&best.1)?;

    let mut out = params.clone();
    let mut fitted = Vec::new();
    for f in &spec.free {
        let value = fitted_params.get(&f.key).expect("validated key");
        out.set_calibrated(&f.key, value)?;
        fitted.push(FittedValue {
            key: f.key.clone(),
            initial: params.params.get(&f.key).expect("validated key"),
            fitted: value,
            lower: f.lower,
            upper: f.upper,
        });
    }
    if spec.rebalance.is_some() {
        for key in SOLVED_KEYS {
            out.set_with_source(
                key,
                fitted_params.get(key).expect("registry key"),
                Provenance::Equilibrium,
            )?;
        }
    }

    let warning = if n > 0 && scored.loss >= initial_loss {
        Some(format!(
            "no improvement over the starting loss {initial_loss} in {evaluations} evaluations; returning the starting point"
        ))
    } else if !converged {
        Some(format!(
            "budget of {} evaluations exhausted before convergence",
            spec.budget
        ))
    } else {
        None
    };

    Ok(CalibrationResult {
        params: out,
        report: CalibrationReport {
            seed: spec.seed,
            evaluations,
            initial_loss,
            final_loss: scored.loss,
            converged,
            warning,
            fitted,
            targets: scored.targets,
            references: scored.references,
        },
    })
}

/// Runs Nelder-Mead on `simplex` for at most `budget` evaluations. Returns
/// whether it converged and the evaluations used.
fn nelder_mead(objective: &Objective, simplex: &mut Simplex, budget: usize, tolerance: f64) -> (bool, usize) {
    let n = simplex.points.len() - 1;
    let mut used = 0;
    loop {
        simplex.sort();
        let best = simplex.points[0].0;
        if simplex.spread() <= tolerance * (best.abs() + tolerance) || simplex.diameter() < 1e-12 {
            return (true, used);
        }
        if used + 2 > budget {
            return (false, used);
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex.points[..n].iter().map(|p| p.1[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex.points[n].clone();
        let along = |a: f64| project(centroid.iter().zip(&worst.1).map(|(c, w)| c + a * (w - c)).collect());

        let xr = along(-1.0);
        let fr = objective.loss(&xr);
        used += 1;
        if fr < best {
            let xe = along(-2.0);
            let fe = objective.loss(&xe);
            used += 1;
            simplex.points[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex.points[n - 1].0 {
            simplex.points[n] = (fr, xr);
        } else {
            // Outside contraction if the reflection helped at all,
            // inside otherwise.
            let xc = along(if fr < worst.0 { -0.5 } else { 0.5 });
            let fc = objective.loss(&xc);
            used += 1;
            if fc < worst.0.min(fr) {
                simplex.points[n] = (fc, xc);
            } else {
                if used + n > budget {
                    return (false, used);
                }
                let anchor = simplex.points[0].1.clone();
                let shrunk: Vec<(f64, Vec<f64>)> = simplex.points[1..]
                    .par_iter()
                    .map(|(_, x)| {
                        let y: Vec<f64> = x.iter().zip(&anchor).map(|(v, a)| a + 0.5 * (v - a)).collect();
                        (objective.loss(&y), y)
                    })
                    .collect();
                used += n;
                simplex.points.truncate(1);
                simplex.points.extend(shrunk);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run2_only() -> ScenarioSet {
        ScenarioSet::from_toml_str("[[scenario]]\nname = 'run2'\ncovid = true\nmoratorium = false\nera = false\n")
            .unwrap()
    }

    fn planted_spec(target: f64) -> CalibrationSpec {
        CalibrationSpec::from_toml_str(&format!(
            "seed = 3\nbudget = 200\n\
             [[free]]\nkey = 'covid.magnitude'\nlower = 0.2\nupper = 0.7\n\
             [[target]]\nmetric = 'run2.arrears_at_mark'\nvalue = {target}\nscale = {}\n",
            target * 0.01
        ))
        .unwrap()
    }

    fn planted_target(value: f64) -> f64 {
        let mut p = ParamSet::builtin();
        p.params.covid.magnitude = value;
        let runs = run_all(&run2_only(), &p.params, &SimClock::default()).unwrap();
        runs[0].metrics.arrears_at_mark
    }

    #[test]
    fn recovers_a_planted_parameter() {
        let planted = 0.42;
        let spec = planted_spec(planted_target(planted));
        let params = ParamSet::builtin();
        let r = calibrate(&spec, &params, &run2_only(), &SimClock::default()).unwrap();
        let fitted = r.params.params.covid.magnitude;
        assert!((fitted - planted).abs() / planted < 0.01, "fitted {fitted}");
        assert_eq!(r.params.meta["covid.magnitude"].source, Provenance::Calibrated);
        assert!(r.report.final_loss < r.report.initial_loss);
    }

    #[test]
    fn identical_inputs_give_identical_fits() {
        let spec = planted_spec(planted_target(0.3));
        let params = ParamSet::builtin();
        let a = calibrate(&spec, &params, &run2_only(), &SimClock::default()).unwrap();
        let b = calibrate(&spec, &params, &run2_only(), &SimClock::default()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.params.to_toml_string(), b.params.to_toml_string());
    }

    #[test]
    fn empty_spec_returns_the_input() {
        let spec =
            CalibrationSpec::from_toml_str("[[target]]\nmetric = 'run2.total_evictions'\nvalue = 0.0\nscale = 1e6\n")
                .unwrap();
        let params = ParamSet::builtin();
        let r = calibrate(&spec, &params, &run2_only(), &SimClock::default()).unwrap();
        assert_eq!(r.params.to_toml_string(), params.to_toml_string());
        assert_eq!(r.report.initial_loss, r.report.final_loss);
        assert_eq!(r.report.evaluations, 1);
        let evictions = r.report.targets[0].achieved;
        assert_eq!(r.report.final_loss, (evictions / 1e6).powi(2));
    }

    #[test]
    fn starved_budget_warns_and_keeps_the_best_point() {
        let mut spec = planted_spec(planted_target(0.42));
        spec.budget = 2;
        let params = ParamSet::builtin();
        let r = calibrate(&spec, &params, &run2_only(), &SimClock::default()).unwrap();
        assert!(r.report.warning.is_some());
        assert!(r.report.final_loss <= r.report.initial_loss);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let cases = [
            "[[free]]\nkey = 'covid.magnitude'\nlower = 0.5\nupper = 0.2\n",
            "[[free]]\nkey = 'covid.nothing'\nlower = 0.1\nupper = 0.2\n",
            "[rebalance]\nfilings_per_month = 3.0\nprocessed_per_month = 2.0\n\
             [[free]]\nkey = 'units.move_in_time'\nlower = 0.1\nupper = 2.0\n",
            "[[target]]\nmetric = 'x'\nvalue = 1.0\nscale = 0.0\n",
            "budgt = 3\n",
        ];
        for text in cases {
            assert!(CalibrationSpec::from_toml_str(text).is_err(), "{text}");
        }
        let spec =
            CalibrationSpec::from_toml_str("[[target]]\nmetric = 'eviction_increase_pct'\nvalue = 1.0\n").unwrap();
        assert!(calibrate(&spec, &ParamSet::builtin(), &run2_only(), &SimClock::default()).is_err());
    }
}
