use serde::Serialize;

use super::clock::SimClock;
use super::state::StateVector;
use crate::error::SimError;

/// Something that can report the net rate of change of every stock.
///
/// `dt` is passed so that flow formulations can cap first-order drains at
/// `stock / dt`. Implementations must be pure; the same inputs give the same
/// output, so concurrent runs over disjoint states are safe.
pub trait DerivativeModel {
    /// Per-sample auxiliary data kept in the trajectory (flows, effects).
    type Record: Clone;

    fn evaluate(&self, state: &StateVector, t: f64, dt: f64) -> Result<Evaluation<Self::Record>, SimError>;
}

/// Output of one derivative evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<R> {
    pub derivatives: Vec<f64>,
    pub record: R,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DiagnosticKind {
    /// A non-negative stock went below zero and was clamped.
    Clamp,
    /// A per-unit division hit its epsilon floor.
    EpsilonGuard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub time: f64,
    pub kind: DiagnosticKind,
    pub subject: String,
    /// Pre-clamp level for clamps; the guarded denominator otherwise.
    pub value: f64,
}

/// `stock' = stock + dt * derivative`, clamping non-negative stocks at zero.
///
/// Returns the new state and one `Clamp` diagnostic per clamped stock. A clamp
/// means some flow was not limited to `stock / dt`.
pub fn euler_step(
    state: &StateVector,
    derivatives: &[f64],
    dt: f64,
    t: f64,
) -> Result<(StateVector, Vec<Diagnostic>), SimError> {
    if derivatives.len() != state.len() {
        return Err(SimError::DerivativeLength {
            expected: state.len(),
            got: derivatives.len(),
        });
    }
    let mut next = state.clone();
    let mut clamps = Vec::new();
    for (i, spec) in state.layout().iter().enumerate() {
        let d = derivatives[i];
        if !d.is_finite() {
            return Err(SimError::NonFinite {
                time: t,
                stock: spec.name.to_string(),
                value: d,
            });
        }
        let mut v = state.get(i) + dt * d;
        if spec.non_negative && v < 0.0 {
            clamps.push(Diagnostic {
                time: t + dt,
                kind: DiagnosticKind::Clamp,
                subject: spec.name.to_string(),
                value: v,
            });
            v = 0.0;
        }
        if !v.is_finite() {
            return Err(SimError::NonFinite {
                time: t + dt,
                stock: spec.name.to_string(),
                value: v,
            });
        }
        next.set(i, v);
    }
    Ok((next, clamps))
}

/// Sampled output of `simulate`: one state and one record per grid point.
#[derive(Debug, Clone)]
pub struct Trajectory<R> {
    pub clock: SimClock,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub records: Vec<R>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<R> Trajectory<R> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &StateVector {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn clamp_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::Clamp)
            .count()
    }

    /// Sample indices whose time falls in the analytical window.
    pub fn window_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, t)| self.clock.in_window(**t))
            .map(|(i, _)| i)
    }

    /// Index of the sample nearest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = (t / self.clock.dt).round();
        (k.max(0.0) as usize).min(self.len() - 1)
    }
}

/// Integrate `model` over the clock with explicit Euler steps.
///
/// Records are evaluated at every sample, including the final one, so flows
/// at `t = horizon` are available for reporting.
pub fn simulate<M: DerivativeModel>(
    model: &M,
    clock: &SimClock,
    initial: StateVector,
) -> Result<Trajectory<M::Record>, SimError> {
    clock.validate()?;
    if let Some(name) = initial.negative_stocks().first() {
        return Err(SimError::InvalidInitialState(format!("stock {name} is negative")));
    }
    for (spec, v) in initial.layout().iter().zip(initial.values()) {
        if !v.is_finite() {
            return Err(SimError::NonFinite {
                time: 0.0,
                stock: spec.name.to_string(),
                value: *v,
            });
        }
    }

    let steps = clock.steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut records = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::new();

    let mut state = initial;
    for k in 0..=steps {
        let t = clock.time_at(k);
        let eval = model.evaluate(&state, t, clock.dt)?;
        diagnostics.extend(eval.diagnostics);
        times.push(t);
        records.push(eval.record);
        if k == steps {
            states.push(state);
            break;
        }
        let (next, clamps) = euler_step(&state, &eval.derivatives, clock.dt, t)?;
        diagnostics.extend(clamps);
        states.push(std::mem::replace(&mut state, next));
    }

    Ok(Trajectory {
        clock: *clock,
        times,
        states,
        records,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::inputs::{SmoothState, StepInput};
    use crate::engine::state::StockSpec;

    static ONE: [StockSpec; 1] = [StockSpec {
        name: "R",
        units: "dollars",
        non_negative: true,
    }];

    static SMOOTHED: [StockSpec; 1] = [StockSpec {
        name: "smooth",
        units: "dimensionless",
        non_negative: false,
    }];

    struct Closure<F>(F);

    impl<F> DerivativeModel for Closure<F>
    where
        F: Fn(&StateVector, f64, f64) -> Vec<f64>,
    {
        type Record = ();
        fn evaluate(&self, s: &StateVector, t: f64, dt: f64) -> Result<Evaluation<()>, SimError> {
            Ok(Evaluation {
                derivatives: (self.0)(s, t, dt),
                record: (),
                diagnostics: Vec::new(),
            })
        }
    }

    #[test]
    fn euler_step_half_drain() {
        let s = StateVector::from_values(&ONE, vec![100.0]);
        let (next, clamps) = euler_step(&s, &[-50.0], 0.25, 0.0).unwrap();
        assert_eq!(next.get(0), 87.5);
        assert!(clamps.is_empty());
    }

    #[test]
    fn euler_step_zero_flow_is_identity() {
        let s = StateVector::from_values(&ONE, vec![42.0]);
        let (next, _) = euler_step(&s, &[0.0], 0.25, 0.0).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn limited_drain_never_goes_negative() {
        let dt = 0.25;
        let s = StateVector::from_values(&ONE, vec![1.0]);
        let demand: f64 = 10.0;
        let limited = demand.min(s.get(0) / dt);
        let (next, clamps) = euler_step(&s, &[-limited], dt, 0.0).unwrap();
        assert!(next.get(0) >= 0.0);
        assert!(clamps.is_empty());
        // without the limiter the clamp fires and is reported
        let (clamped, clamps) = euler_step(&s, &[-demand], dt, 0.0).unwrap();
        assert_eq!(clamped.get(0), 0.0);
        assert_eq!(clamps.len(), 1);
        assert_eq!(clamps[0].subject, "R");
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let s = StateVector::from_values(&ONE, vec![1.0]);
        let err = euler_step(&s, &[f64::NAN], 0.25, 3.0).unwrap_err();
        match err {
            SimError::NonFinite { time, stock, .. } => {
                assert_eq!(time, 3.0);
                assert_eq!(stock, "R");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_model_gives_constant_trajectory() {
        let model = Closure(|s: &StateVector, _, _| vec![0.0; s.len()]);
        let clock = SimClock::default();
        let traj = simulate(&model, &clock, StateVector::from_values(&ONE, vec![7.0])).unwrap();
        assert_eq!(traj.len(), 201);
        assert!(traj.states.iter().all(|s| s.get(0) == 7.0));
        assert_eq!(*traj.times.last().unwrap(), 50.0);
    }

    #[test]
    fn exponential_drain_matches_discrete_closed_form() {
        let at = 2.0;
        let model = Closure(move |s: &StateVector, _, _| vec![-s.get(0) / at]);
        let clock = SimClock::default();
        let traj = simulate(&model, &clock, StateVector::from_values(&ONE, vec![100.0])).unwrap();
        for (k, state) in traj.states.iter().enumerate() {
            let oracle = 100.0 * (1.0 - clock.dt / at).powi(k as i32);
            assert!((state.get(0) - oracle).abs() <= 1e-12 * 100.0, "k={k}");
        }
    }

    #[test]
    fn smoothed_step_reaches_63_percent_after_one_delay() {
        let step = StepInput::new(1.0, 24.0);
        let delay = 6.0;
        let model =
            Closure(move |s: &StateVector, t, _| vec![SmoothState::new(s.get(0), delay).derivative(step.eval(t))]);
        let clock = SimClock::default();
        let traj = simulate(&model, &clock, StateVector::from_values(&SMOOTHED, vec![0.0])).unwrap();
        let at_30 = traj.states[traj.index_at(30.0)].get(0);
        assert!(at_30 >= 0.63, "got {at_30}");
        assert_eq!(traj.states[traj.index_at(24.0)].get(0), 0.0);
    }

    #[test]
    fn rejects_negative_initial_state() {
        let model = Closure(|s: &StateVector, _, _| vec![0.0; s.len()]);
        let err = simulate(&model, &SimClock::default(), StateVector::from_values(&ONE, vec![-1.0]));
        assert!(matches!(err, Err(SimError::InvalidInitialState(_))));
    }
}
