use serde::Serialize;

use crate::engine::DiagnosticKind;
use crate::error::{Error, Result};
use crate::model::{HousingStocks, HousingTrajectory, ModelParams};

use super::RunResult;

/// Months from simulation start at which accumulated arrears are reported
/// (January 2021).
pub const SHOCK_MARK: f64 = 36.0;

/// Months from simulation start at which cumulative assistance paid out is
/// checked (February 2022).
pub const ERA_CHECKPOINT: f64 = 49.0;

/// Headline outcomes of one run. Totals and means cover the analytical
/// window `[burn_in, horizon)`; "end" values are the final sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSet {
    /// Processed evictions summed over the window, units.
    pub total_evictions: f64,
    /// Eviction filings summed over the window, units.
    pub total_filings: f64,
    /// Rent due stock at `SHOCK_MARK`, dollars.
    pub arrears_at_mark: f64,
    pub arrears_at_end: f64,
    pub peak_arrears: f64,
    /// Households per tenanted unit, window mean.
    pub mean_crowding: f64,
    pub crowding_at_end: f64,
    pub mean_homeless: f64,
    pub homeless_at_end: f64,
    pub peak_homeless: f64,
    pub insecure_at_end: f64,
    /// Cumulative assistance paid by `ERA_CHECKPOINT`, dollars.
    pub era_disbursed_at_checkpoint: f64,
    pub era_disbursed: f64,
    pub era_remaining: f64,
    /// First sample time at which the assistance stock is empty.
    pub era_exhausted_at: Option<f64>,
    /// Per-unit divisions that hit the epsilon floor.
    pub guard_events: usize,
}

impl MetricSet {
    pub fn from_trajectory(tr: &HousingTrajectory, params: &ModelParams) -> Self {
        let dt = tr.clock.dt;
        let window: Vec<usize> = tr.window_indices().collect();
        let n = window.len().max(1) as f64;
        let stocks: Vec<HousingStocks> = tr.states.iter().map(HousingStocks::from_state).collect();
        let last = stocks.last().expect("trajectory is never empty");
        let allocated = if params.switches.era {
            params.era.total_funds
        } else {
            0.0
        };
        let mark = &stocks[tr.index_at(SHOCK_MARK)];
        let checkpoint = &stocks[tr.index_at(ERA_CHECKPOINT)];
        Self {
            total_evictions: window.iter().map(|&i| tr.records[i].processed).sum::<f64>() * dt,
            total_filings: window.iter().map(|&i| tr.records[i].filings).sum::<f64>() * dt,
            arrears_at_mark: mark.rent_due,
            arrears_at_end: last.rent_due,
            peak_arrears: stocks.iter().map(|s| s.rent_due).fold(0.0, f64::max),
            mean_crowding: window.iter().map(|&i| tr.records[i].crowding).sum::<f64>() / n,
            crowding_at_end: tr.records.last().map_or(0.0, |r| r.crowding),
            mean_homeless: window.iter().map(|&i| stocks[i].households_homeless).sum::<f64>() / n,
            homeless_at_end: last.households_homeless,
            peak_homeless: stocks.iter().map(|s| s.households_homeless).fold(0.0, f64::max),
            insecure_at_end: last.households_insecure,
            era_disbursed_at_checkpoint: allocated - checkpoint.era_funds,
            era_disbursed: allocated - last.era_funds,
            era_remaining: last.era_funds,
            era_exhausted_at: if allocated > 0.0 {
                tr.times
                    .iter()
                    .zip(&stocks)
                    .find(|(_, s)| s.era_funds <= 0.0)
                    .map(|(t, _)| *t)
            } else {
                None
            },
            guard_events: tr
                .diagnostics
                .iter()
                .filter(|d| d.kind == DiagnosticKind::EpsilonGuard)
                .count(),
        }
    }

    /// Numeric metrics by name, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("total_evictions", self.total_evictions),
            ("total_filings", self.total_filings),
            ("arrears_at_mark", self.arrears_at_mark),
            ("arrears_at_end", self.arrears_at_end),
            ("peak_arrears", self.peak_arrears),
            ("mean_crowding", self.mean_crowding),
            ("crowding_at_end", self.crowding_at_end),
            ("mean_homeless", self.mean_homeless),
            ("homeless_at_end", self.homeless_at_end),
            ("peak_homeless", self.peak_homeless),
            ("insecure_at_end", self.insecure_at_end),
            ("era_disbursed_at_checkpoint", self.era_disbursed_at_checkpoint),
            ("era_disbursed", self.era_disbursed),
            ("era_remaining", self.era_remaining),
        ]
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.entries().into_iter().find(|(k, _)| *k == metric).map(|(_, v)| v)
    }

    /// Percent change of `metric` relative to `baseline`; `None` when the
    /// baseline value is zero and the variant is not.
    pub fn pct_change_vs(&self, baseline: &MetricSet, metric: &str) -> Result<Option<f64>> {
        let unknown = || Error::Validation(format!("unknown metric `{metric}`"));
        let v = self.get(metric).ok_or_else(unknown)?;
        let b = baseline.get(metric).ok_or_else(unknown)?;
        Ok(pct_change(b, v))
    }
}

fn pct_change(baseline: f64, variant: f64) -> Option<f64> {
    if baseline == 0.0 {
        (variant == 0.0).then_some(0.0)
    } else {
        Some(100.0 * (variant - baseline) / baseline.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: &'static str,
    pub baseline: f64,
    pub variant: f64,
    pub absolute: f64,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline: String,
    pub variant: String,
    pub deltas: Vec<MetricDelta>,
}

impl Comparison {
    pub fn delta(&self, metric: &str) -> Option<&MetricDelta> {
        self.deltas.iter().find(|d| d.metric == metric)
    }
}

/// Per-metric deltas of `variant` against `baseline`. Both runs must share
/// the same clock so that windows coincide.
pub fn compare(baseline: &RunResult, variant: &RunResult) -> Result<Comparison> {
    let (a, b) = (&baseline.trajectory.clock, &variant.trajectory.clock);
    if a != b {
        return Err(Error::Validation(format!(
            "cannot compare `{}` and `{}`: clocks differ ({a:?} vs {b:?})",
            baseline.name(),
            variant.name()
        )));
    }
    let deltas = baseline
        .metrics
        .entries()
        .into_iter()
        .zip(variant.metrics.entries())
        .map(|((metric, b), (_, v))| MetricDelta {
            metric,
            baseline: b,
            variant: v,
            absolute: v - b,
            percent: pct_change(b, v),
        })
        .collect();
    Ok(Comparison {
        baseline: baseline.name().to_string(),
        variant: variant.name().to_string(),
        deltas,
    })
}

/// The cross-run outcomes the scenario suite is judged on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Headline {
    /// Run 2 processed evictions over Run 1, percent.
    pub eviction_increase_pct: f64,
    /// Run 2 minus Run 1 processed evictions, units.
    pub excess_evictions: f64,
    pub run2_arrears_at_mark: f64,
    pub run2_arrears_at_end: f64,
    /// Run 2 over Run 1 crowding at the end of the window, percent.
    pub crowding_increase_pct: f64,
    /// Same comparison on window means.
    pub mean_crowding_increase_pct: f64,
    /// Run 2 over Run 1 homeless households at the end of the window, percent.
    pub homeless_increase_pct: f64,
    /// Run 2 peak homeless households over the Run 1 end value, percent.
    pub peak_homeless_increase_pct: f64,
    /// Reduction of Run 3 processed evictions below Run 2, percent.
    pub moratorium_reduction_pct: f64,
    pub run3_arrears_at_end: f64,
    /// Run 4 share of allocated assistance paid by `ERA_CHECKPOINT`, percent.
    pub run4_era_share_at_checkpoint: f64,
    pub run4_arrears_at_end: f64,
    pub run4a_arrears_at_end: f64,
    /// Run 4a over Run 4 end-of-window arrears.
    pub faster_era_arrears_ratio: f64,
    pub run4_era_exhausted_at: Option<f64>,
    pub run4a_era_exhausted_at: Option<f64>,
}

impl Headline {
    /// Needs runs named `run1`, `run2`, `run3`, `run4` and `run4a`.
    pub fn from_results(results: &[RunResult]) -> Result<Self> {
        let find = |name: &str| {
            results
                .iter()
                .find(|r| r.name() == name)
                .map(|r| (&r.metrics, &r.params))
                .ok_or_else(|| Error::UnknownScenario(name.to_string()))
        };
        let (r1, _) = find("run1")?;
        let (r2, _) = find("run2")?;
        let (r3, _) = find("run3")?;
        let (r4, p4) = find("run4")?;
        let (r4a, _) = find("run4a")?;
        let pct = |b: f64, v: f64| 100.0 * (v - b) / b;
        Ok(Self {
            eviction_increase_pct: pct(r1.total_evictions, r2.total_evictions),
            excess_evictions: r2.total_evictions - r1.total_evictions,
            run2_arrears_at_mark: r2.arrears_at_mark,
            run2_arrears_at_end: r2.arrears_at_end,
            crowding_increase_pct: pct(r1.crowding_at_end, r2.crowding_at_end),
            mean_crowding_increase_pct: pct(r1.mean_crowding, r2.mean_crowding),
            homeless_increase_pct: pct(r1.homeless_at_end, r2.homeless_at_end),
            peak_homeless_increase_pct: pct(r1.homeless_at_end, r2.peak_homeless),
            moratorium_reduction_pct: -pct(r2.total_evictions, r3.total_evictions),
            run3_arrears_at_end: r3.arrears_at_end,
            run4_era_share_at_checkpoint: 100.0 * r4.era_disbursed_at_checkpoint / p4.era.total_funds,
            run4_arrears_at_end: r4.arrears_at_end,
            run4a_arrears_at_end: r4a.arrears_at_end,
            faster_era_arrears_ratio: r4a.arrears_at_end / r4.arrears_at_end,
            run4_era_exhausted_at: r4.era_exhausted_at,
            run4a_era_exhausted_at: r4a.era_exhausted_at,
        })
    }

    /// Numeric headline values by name, in a stable order.
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.entries().into_iter().find(|(k, _)| *k == metric).map(|(_, v)| v)
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("eviction_increase_pct", self.eviction_increase_pct),
            ("excess_evictions", self.excess_evictions),
            ("run2_arrears_at_mark", self.run2_arrears_at_mark),
            ("run2_arrears_at_end", self.run2_arrears_at_end),
            ("crowding_increase_pct", self.crowding_increase_pct),
            ("mean_crowding_increase_pct", self.mean_crowding_increase_pct),
            ("homeless_increase_pct", self.homeless_increase_pct),
            ("peak_homeless_increase_pct", self.peak_homeless_increase_pct),
            ("moratorium_reduction_pct", self.moratorium_reduction_pct),
            ("run3_arrears_at_end", self.run3_arrears_at_end),
            ("run4_era_share_at_checkpoint", self.run4_era_share_at_checkpoint),
            ("run4_arrears_at_end", self.run4_arrears_at_end),
            ("run4a_arrears_at_end", self.run4a_arrears_at_end),
            ("faster_era_arrears_ratio", self.faster_era_arrears_ratio),
        ]
    }
}
