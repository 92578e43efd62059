//! Flow equations of the housing market model.
//!
//! Each function computes one group of flows from the current stocks. They
//! return raw (unlimited) rates; `evaluate` composes them, applies the
//! first-order drain limiters and assembles net stock derivatives.

use serde::Serialize;

use crate::engine::{SmoothState, StepInput};

use super::params::ModelParams;
use super::stocks::HousingStocks;

/// Floor for per-unit and per-household denominators.
pub const EPSILON: f64 = 1e-9;

/// Records which denominators hit the epsilon floor during one evaluation.
#[derive(Debug, Default, Clone)]
pub struct Guards {
    pub hits: Vec<&'static str>,
}

impl Guards {
    pub fn div(&mut self, num: f64, den: f64, subject: &'static str) -> f64 {
        if den < EPSILON {
            if !self.hits.contains(&subject) {
                self.hits.push(subject);
            }
            num / EPSILON
        } else {
            num / den
        }
    }
}

/// `STEP(M_e, TS_e)`, or a zero step when the shock is switched off.
pub fn covid_step(params: &ModelParams) -> StepInput {
    let magnitude = if params.switches.covid {
        params.covid.magnitude
    } else {
        0.0
    };
    StepInput::new(magnitude, params.covid.start_time)
}

/// Economic impact `STEP(M_e, TS_e) - SMTH(STEP(M_e, TS_e), D_e)`.
pub fn covid_shock(params: &ModelParams, covid_smooth: f64, t: f64) -> f64 {
    covid_step(params).eval(t) - covid_smooth
}

pub fn covid_smooth_derivative(params: &ModelParams, covid_smooth: f64, t: f64) -> f64 {
    SmoothState::new(covid_smooth, params.covid.recovery_delay).derivative(covid_step(params).eval(t))
}

/// Step the filing-recovery smooth chases: the filing reduction, switched on
/// `filing_resume_lag` months after the moratorium ends.
pub fn filing_recovery_step(params: &ModelParams) -> StepInput {
    let m = &params.moratorium;
    let magnitude = if params.switches.moratorium {
        m.filing_reduction
    } else {
        0.0
    };
    StepInput::new(magnitude, m.end_time() + m.filing_resume_lag)
}

pub fn filing_smooth_derivative(params: &ModelParams, filing_smooth: f64, t: f64) -> f64 {
    SmoothState::new(filing_smooth, params.moratorium.filing_recovery_delay)
        .derivative(filing_recovery_step(params).eval(t))
}

/// `(processing_factor, filing_factor)` applied to processed evictions and
/// new filings.
///
/// Processing drops to `1 - ES_EM` over `[TS_EM, TS_EM + duration)`. Filings
/// drop by the reduction magnitude half a month before the moratorium and
/// recover through the first-order `filing_smooth` state afterwards.
pub fn moratorium_factors(params: &ModelParams, filing_smooth: f64, t: f64) -> (f64, f64) {
    if !params.switches.moratorium {
        return (1.0, 1.0);
    }
    let m = &params.moratorium;
    let processing = if t >= m.start_time && t < m.end_time() {
        1.0 - m.effect_size
    } else {
        1.0
    };
    let drop = StepInput::new(m.filing_reduction, m.start_time - 0.5).eval(t);
    let filing = (1.0 - drop + filing_smooth).clamp(0.0, 1.0);
    (processing, filing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RentDelay {
    /// Effective household income after the shock, dollars/household/month.
    pub income: f64,
    /// Rent due per household over effective income.
    pub burden: f64,
    /// `E_r`, the multiplier on time to pay.
    pub effect: f64,
    /// `AT_r` in months.
    pub avg_time: f64,
}

/// Delay in paying rent driven by the housing cost burden.
///
/// The burden is total rent due per household over monthly income; the excess
/// over the threshold, in threshold units, drives the asymptotic delay curve.
/// Arrears count toward the burden, which closes the arrears spiral.
pub fn rent_delay(s: &HousingStocks, params: &ModelParams, covid: f64, guards: &mut Guards) -> RentDelay {
    let r = &params.rent;
    let income = r.avg_household_income * (1.0 - covid);
    let per_household = guards.div(s.rent_due, s.households_insecure, "rent per household");
    let burden = if income > EPSILON {
        per_household / income
    } else {
        guards.div(per_household, income.max(0.0), "household income")
    };
    let excess = (burden - r.rent_burden_threshold).max(0.0) / r.rent_burden_threshold;
    let effect = params.curves.rent_delay.eval(excess).max(1.0);
    RentDelay {
        income,
        burden,
        effect,
        avg_time: r.at_rent_base * effect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RentFlows {
    pub due: f64,
    pub payments: f64,
    pub writeoff: f64,
}

/// Rent becoming due, paid, and written off when tenants leave.
///
/// Departing households (processed evictions and move-outs) take their share
/// of unpaid rent with them; it leaves the stock without being paid.
pub fn rent_flows(
    s: &HousingStocks,
    params: &ModelParams,
    delay: &RentDelay,
    departing_units: f64,
    guards: &mut Guards,
) -> RentFlows {
    let tenanted = s.tenanted_units();
    let per_unit = if s.rent_due > 0.0 {
        guards.div(s.rent_due, tenanted, "rent per unit")
    } else {
        0.0
    };
    RentFlows {
        due: params.rent.avg_monthly_rent * tenanted,
        payments: s.rent_due / delay.avg_time,
        writeoff: per_unit * departing_units,
    }
}

/// Months of rent owed beyond the bill currently coming due.
pub fn months_behind(s: &HousingStocks, params: &ModelParams) -> f64 {
    let monthly = params.rent.avg_monthly_rent * s.tenanted_units();
    if monthly <= EPSILON {
        return 0.0;
    }
    (s.rent_due - monthly).max(0.0) / monthly
}

/// `E_es`: household economic stress from accumulated arrears.
pub fn economic_stress_effect(s: &HousingStocks, params: &ModelParams) -> f64 {
    params.curves.stress.eval(months_behind(s, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MortgageFlows {
    pub due: f64,
    pub payments: f64,
    /// Mortgage due over landlord income, months.
    pub ratio: f64,
    /// `E_m`.
    pub effect: f64,
}

/// Landlord mortgage flows. `landlord_income` is rent actually received
/// (tenant payments plus assistance), dollars/month.
pub fn mortgage_flows(
    s: &HousingStocks,
    params: &ModelParams,
    landlord_income: f64,
    guards: &mut Guards,
) -> MortgageFlows {
    let l = &params.landlord;
    let ratio = if s.mortgage_due > 0.0 {
        guards.div(s.mortgage_due, landlord_income, "landlord income")
    } else {
        0.0
    };
    let effect = params.curves.mortgage_delay.eval(ratio);
    MortgageFlows {
        due: l.avg_monthly_mortgage * s.mortgaged_units(),
        payments: s.mortgage_due / (l.at_mortgage_base * effect),
        ratio,
        effect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crowding {
    /// Households per tenanted unit over the reference occupancy.
    pub ratio: f64,
    /// `E_cr`; exactly 1 at or below the reference.
    pub effect: f64,
    /// Crowding effect times economic stress.
    pub conflict: f64,
}

pub fn crowding_and_conflict(s: &HousingStocks, params: &ModelParams, stress: f64) -> Crowding {
    let tenanted = s.tenanted_units();
    let ratio = if tenanted > EPSILON {
        s.households_insecure / tenanted / params.households.crowding_reference
    } else {
        0.0
    };
    let effect = if ratio <= 1.0 {
        1.0
    } else {
        params.curves.crowding.eval(ratio)
    };
    Crowding {
        ratio,
        effect,
        conflict: effect * stress,
    }
}

/// `(e_f, E_or)`: new eviction filings and the overdue-rent effect.
pub fn eviction_filing_flow(
    s: &HousingStocks,
    params: &ModelParams,
    mortgage_pressure: f64,
    conflict: f64,
    filing_factor: f64,
    guards: &mut Guards,
) -> (f64, f64) {
    let per_unit = if s.rent_due > 0.0 {
        guards.div(s.rent_due, s.tenanted_units(), "rent per unit")
    } else {
        0.0
    };
    let tolerance = params.landlord.landlord_tolerance;
    let overdue = if per_unit > 0.0 {
        guards.div(per_unit, tolerance, "landlord tolerance").max(1.0)
    } else {
        1.0
    };
    let filings = params.eviction.baseline_filing_fraction
        * s.units_occupied
        * overdue
        * mortgage_pressure
        * conflict
        * filing_factor;
    (filings, overdue)
}

/// `e_p`: evictions processed by the courts.
pub fn eviction_processing_flow(s: &HousingStocks, params: &ModelParams, covid: f64, processing_factor: f64) -> f64 {
    let e = &params.eviction;
    let proportion = e.proc_proportion * (1.0 - covid) * processing_factor;
    proportion / e.at_process * s.units_pending
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitFlows {
    pub resolving: f64,
    pub moving_out: f64,
    pub moving_in: f64,
    pub foreclosed_occupied: f64,
    pub foreclosed_pending: f64,
    pub foreclosed_unoccupied: f64,
    pub sales: f64,
    pub decline: f64,
}

/// Turnover, move-in, resolution and foreclosure flows between unit states.
///
/// Move-ins are limited both by vacant supply and by demand from households
/// above the reference occupancy. Lease-up slows by the same affordability
/// delay that slows rent payment.
pub fn unit_flows(
    s: &HousingStocks,
    params: &ModelParams,
    stress: f64,
    mortgage_pressure: f64,
    rent_delay_effect: f64,
) -> UnitFlows {
    let u = &params.units;
    let seeking = (s.households_insecure - params.households.crowding_reference * s.tenanted_units()).max(0.0);
    UnitFlows {
        resolving: s.units_pending / params.eviction.filing_resolution_time,
        moving_out: u.baseline_turnover_fraction * s.units_occupied * stress,
        moving_in: s.units_unoccupied.min(seeking) / (u.move_in_time * rent_delay_effect.max(1.0)),
        foreclosed_occupied: u.foreclosure_fraction_occupied * s.units_occupied * mortgage_pressure,
        foreclosed_pending: u.foreclosure_fraction_occupied * s.units_pending * mortgage_pressure,
        foreclosed_unoccupied: u.foreclosure_fraction_unoccupied * s.units_unoccupied,
        sales: s.units_foreclosed / u.foreclosure_sale_time,
        decline: u.stock_decline_fraction * s.units_unoccupied,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HouseholdFlows {
    pub new_insecure: f64,
    pub stabilizing_insecure: f64,
    pub new_homeless: f64,
    pub entering_homeless: f64,
    pub exiting_homeless: f64,
    pub doubling_up: f64,
    pub stabilizing_homeless: f64,
}

/// Household flows between housing insecurity and literal homelessness.
///
/// Displaced households (evictions and foreclosures) enter homelessness in
/// proportion `homeless_entry_fraction`; the rest double up and stay in the
/// insecure stock. Household conflict above its no-effect level pushes a
/// further share of insecure households out.
pub fn household_flows(
    s: &HousingStocks,
    params: &ModelParams,
    covid: f64,
    processed: f64,
    foreclosed: f64,
    conflict: f64,
    guards: &mut Guards,
) -> HouseholdFlows {
    let h = &params.households;
    let per_unit = if s.households_insecure > 0.0 {
        guards.div(s.households_insecure, s.tenanted_units(), "households per unit")
    } else {
        0.0
    };
    let displaced = (processed + foreclosed) * per_unit;
    let conflict_entry = h.conflict_entry_fraction * s.households_insecure * (conflict - 1.0).max(0.0);
    HouseholdFlows {
        new_insecure: h.rate_new_insecurity * (1.0 + covid),
        stabilizing_insecure: h.fr_stabilize_insecure * s.households_insecure * (1.0 - covid),
        new_homeless: h.rate_new_homelessness * (1.0 + covid),
        entering_homeless: h.homeless_entry_fraction * displaced + conflict_entry,
        exiting_homeless: h.fr_exit_homeless * s.households_homeless,
        doubling_up: h.fr_double_up_homeless * s.households_homeless,
        stabilizing_homeless: h.fr_stabilize_homeless * s.households_homeless * (1.0 - covid),
    }
}

/// Emergency rental assistance paid against rent due, dollars/month.
///
/// Funds go out at a constant rate (`total / disbursement_time`, scaled by
/// the scenario multiplier) once the programme starts, until the remaining
/// funds or the rent owed run out.
pub fn era_flows(s: &HousingStocks, params: &ModelParams, t: f64, dt: f64) -> f64 {
    if !params.switches.era || t < params.era.start_time {
        return 0.0;
    }
    let rate = params.switches.era_rate_multiplier * params.era.total_funds / params.era.disbursement_time;
    rate.min(s.era_funds / dt).min(s.rent_due / dt).max(0.0)
}

/// Scale `outflows` so their total cannot drain more than `available` in
/// one step of length `dt`.
pub fn limit_outflows(available: f64, dt: f64, outflows: &mut [&mut f64]) {
    let cap = available.max(0.0) / dt;
    let total: f64 = outflows.iter().map(|f| **f).sum();
    if total > cap {
        let scale = if total > 0.0 {
            cap / total * (1.0 - 4.0 * f64::EPSILON)
        } else {
            0.0
        };
        for f in outflows.iter_mut() {
            **f *= scale;
        }
    }
}
