//! Pre-shock equilibrium: solve the flow constants and unobserved initial
//! stocks that make the no-shock model stationary.
//!
//! Observed levels (occupied and vacant units, insecure and homeless
//! households) and the structural constants are inputs. The solver sets
//! pending units, rent and mortgage due, foreclosed units, and the constants
//! that close each stock's balance: the filing fraction, the filing
//! resolution time, the move-in time and the two household inflow rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::flows;
use super::params::ModelParams;
use super::stocks::HousingStocks;
use super::HousingModel;

/// Parameters `balance` overwrites.
pub const SOLVED_KEYS: &[&str] = &[
    "initial.units_pending",
    "initial.rent_due",
    "initial.mortgage_due",
    "initial.units_foreclosed",
    "eviction.baseline_filing_fraction",
    "eviction.filing_resolution_time",
    "units.move_in_time",
    "households.rate_new_insecurity",
    "households.rate_new_homelessness",
];

/// Pre-shock eviction volumes the equilibrium reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumTargets {
    /// New eviction filings, units/month.
    pub filings_per_month: f64,
    /// Court-processed evictions, units/month.
    pub processed_per_month: f64,
}

impl EquilibriumTargets {
    /// Volumes implied by the parameter set's current initial state.
    pub fn from_params(params: &ModelParams) -> Self {
        let model = HousingModel::new(no_shock(params));
        let s = HousingStocks::initial(&model.params);
        let (_, record, _) = model.flows(&s, 0.0, 1.0);
        Self {
            filings_per_month: record.filings,
            processed_per_month: record.processed,
        }
    }
}

fn no_shock(params: &ModelParams) -> ModelParams {
    let mut p = params.clone();
    p.switches.covid = false;
    p.switches.moratorium = false;
    p.switches.era = false;
    p
}

/// Smallest root of `f` on `[0, hi]`, where `f(0) > 0` and `f(hi) <= 0`.
///
/// Scans a geometric grid first so that, when the balance has several
/// roots, the low-arrears one is chosen.
fn lowest_root(hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut lo = 0.0;
    let mut upper = hi;
    let grid = 400;
    for k in 1..=grid {
        let x = hi * (k as f64 / grid as f64).powi(2);
        if f(x) <= 0.0 {
            upper = x;
            break;
        }
        lo = x;
    }
    let mut hi = upper;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn invalid(reason: impl Into<String>) -> Error {
    Error::Calibration(format!("equilibrium: {}", reason.into()))
}

/// Returns a copy of `params` balanced to `targets`.
pub fn balance(params: &ModelParams, targets: EquilibriumTargets) -> Result<ModelParams> {
    let mut p = no_shock(params);
    let switches = params.switches.clone();
    let EquilibriumTargets {
        filings_per_month: filings,
        processed_per_month: processed,
    } = targets;
    if !(filings > processed && processed > 0.0) {
        return Err(invalid(format!(
            "need filings > processed > 0, got {filings} and {processed}"
        )));
    }

    let occupied = p.initial.units_occupied;
    let vacant = p.initial.units_unoccupied;
    let insecure = p.initial.households_insecure;
    let homeless = p.initial.households_homeless;

    let pending = processed * p.eviction.at_process / p.eviction.proc_proportion;
    p.initial.units_pending = pending;
    let tenanted = occupied + pending;

    let base = |rent_due: f64, mortgage_due: f64| HousingStocks {
        rent_due,
        mortgage_due,
        units_occupied: occupied,
        units_pending: pending,
        units_unoccupied: vacant,
        units_foreclosed: 0.0,
        households_insecure: insecure,
        households_homeless: homeless,
        era_funds: 0.0,
        covid_smooth: 0.0,
        filing_smooth: 0.0,
    };

    // Rent due: new bills balance payments and write-offs on departures.
    let bill = p.rent.avg_monthly_rent * tenanted;
    let rent_residual = |r: f64| {
        let s = base(r, 0.0);
        let mut g = flows::Guards::default();
        let delay = flows::rent_delay(&s, &p, 0.0, &mut g);
        let stress = flows::economic_stress_effect(&s, &p);
        let moving_out = p.units.baseline_turnover_fraction * occupied * stress;
        bill - r / delay.avg_time - r / tenanted * (processed + moving_out)
    };
    let upper = bill * p.rent.at_rent_base * p.curves.rent_delay.asymptote.max(1.0) * 2.0;
    let rent_due = lowest_root(upper, rent_residual);

    // Mortgage due: bills balance payments, with the delay effect depending
    // on the level through landlord income.
    let s = base(rent_due, 0.0);
    let mut g = flows::Guards::default();
    let delay = flows::rent_delay(&s, &p, 0.0, &mut g);
    let landlord_income = rent_due / delay.avg_time;
    let mortgage_bill = p.landlord.avg_monthly_mortgage * (tenanted + vacant);
    let mortgage_residual = |m: f64| {
        let s = base(rent_due, m);
        let mut g = flows::Guards::default();
        let mf = flows::mortgage_flows(&s, &p, landlord_income, &mut g);
        mortgage_bill - mf.payments
    };
    let upper = mortgage_bill * p.landlord.at_mortgage_base * p.curves.mortgage_delay.y_max.max(1.0) * 2.0;
    let mortgage_due = lowest_root(upper, mortgage_residual);

    let s = base(rent_due, mortgage_due);
    let mut g = flows::Guards::default();
    let mortgage = flows::mortgage_flows(&s, &p, landlord_income, &mut g);
    let stress = flows::economic_stress_effect(&s, &p);
    let crowd = flows::crowding_and_conflict(&s, &p, stress);
    p.eviction.baseline_filing_fraction = 1.0;
    let (unit_filings, _) = flows::eviction_filing_flow(&s, &p, mortgage.effect, crowd.conflict, 1.0, &mut g);
    let ff = filings / unit_filings;
    if !(ff > 0.0 && ff <= 1.0) {
        return Err(invalid(format!("filing fraction {ff} outside (0, 1]")));
    }
    p.eviction.baseline_filing_fraction = ff;

    let u = flows::unit_flows(&s, &p, stress, mortgage.effect, delay.effect);
    let resolving = filings - processed - u.foreclosed_pending;
    if resolving <= 0.0 {
        return Err(invalid("filings do not exceed processed evictions plus foreclosures"));
    }
    p.eviction.filing_resolution_time = pending / resolving;

    let foreclosed = u.foreclosed_occupied + u.foreclosed_pending;
    p.initial.units_foreclosed = (foreclosed + u.foreclosed_unoccupied) * p.units.foreclosure_sale_time;

    let move_ins = processed + u.moving_out + foreclosed - u.decline;
    let seeking = (insecure - p.households.crowding_reference * tenanted).max(0.0);
    let supply = vacant.min(seeking) / delay.effect.max(1.0);
    if move_ins <= 0.0 || supply <= 0.0 {
        return Err(invalid("no move-in demand at the initial state"));
    }
    p.units.move_in_time = supply / move_ins;

    p.initial.rent_due = rent_due;
    p.initial.mortgage_due = mortgage_due;
    let s = HousingStocks {
        units_foreclosed: p.initial.units_foreclosed,
        ..s
    };
    let h = flows::household_flows(&s, &p, 0.0, processed, foreclosed, crowd.conflict, &mut g);
    let rate_homeless = h.exiting_homeless + h.doubling_up + h.stabilizing_homeless - h.entering_homeless;
    let rate_insecure = h.entering_homeless + h.stabilizing_insecure - h.exiting_homeless - h.doubling_up;
    if rate_homeless < 0.0 || rate_insecure < 0.0 {
        return Err(invalid(format!(
            "household inflows would be negative ({rate_insecure}, {rate_homeless})"
        )));
    }
    p.households.rate_new_homelessness = rate_homeless;
    p.households.rate_new_insecurity = rate_insecure;

    p.switches = switches;
    p.validate()?;
    Ok(p)
}

/// Largest net derivative at the initial state, relative to its stock
/// (absolute for stocks at zero), with every shock switched off.
pub fn max_relative_derivative(params: &ModelParams) -> f64 {
    let model = HousingModel::new(no_shock(params));
    let s = HousingStocks::initial(&model.params);
    let (d, _, _) = model.flows(&s, 0.0, 0.25);
    let level = s.to_state();
    d.to_state()
        .values()
        .iter()
        .zip(level.values())
        .map(|(d, v)| if v.abs() > 1.0 { (d / v).abs() } else { d.abs() })
        .fold(0.0, f64::max)
}
