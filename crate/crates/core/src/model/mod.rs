//! The low-income rental market model: stocks, flows and parameters.

pub mod equilibrium;
pub mod flows;
pub mod params;
pub mod stocks;

use serde::Serialize;

use crate::engine::{
    simulate, DerivativeModel, Diagnostic, DiagnosticKind, Evaluation, SimClock, StateVector, Trajectory,
};
use crate::error::SimError;

use flows::{Guards, UnitFlows};
pub use params::{ModelParams, ParamSet, PolicySwitches, Provenance};
pub use stocks::{HousingStocks, Stock};

/// Every flow (per month) and effect computed in one evaluation, after limiting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FlowRecord {
    pub covid_effect: f64,
    pub processing_factor: f64,
    pub filing_factor: f64,
    pub burden: f64,
    pub rent_delay_effect: f64,
    pub months_behind: f64,
    pub stress_effect: f64,
    pub mortgage_effect: f64,
    pub overdue_effect: f64,
    pub crowding: f64,
    pub crowding_effect: f64,
    pub conflict: f64,
    pub rent_due_new: f64,
    pub rent_paid: f64,
    pub era_payment: f64,
    pub arrears_writeoff: f64,
    pub mortgage_due_new: f64,
    pub mortgage_paid: f64,
    pub filings: f64,
    pub processed: f64,
    pub resolved: f64,
    pub moving_out: f64,
    pub moving_in: f64,
    pub foreclosed: f64,
    pub foreclosed_unoccupied: f64,
    pub sales: f64,
    pub decline: f64,
    pub new_insecure: f64,
    pub stabilizing_insecure: f64,
    pub new_homeless: f64,
    pub entering_homeless: f64,
    pub exiting_homeless: f64,
    pub doubling_up: f64,
    pub stabilizing_homeless: f64,
}

/// Names accepted by [`FlowRecord::series`], in output order.
pub const FLOW_SERIES: &[&str] = &[
    "covid_effect",
    "processing_factor",
    "filing_factor",
    "burden",
    "E_r",
    "months_behind",
    "E_es",
    "E_m",
    "E_or",
    "crowding",
    "E_cr",
    "conflict",
    "r_d",
    "r_p",
    "era_payment",
    "arrears_writeoff",
    "m_d",
    "m_p",
    "e_f",
    "e_p",
    "e_r",
    "t_m",
    "t_n",
    "f_o",
    "f_uo",
    "f_s",
    "s_d",
    "i_new",
    "i_stbl",
    "h_new",
    "h_ent",
    "h_exit",
    "h_du",
    "h_stbl",
];

/// Units of a stock or flow series, `None` for unknown names.
pub fn series_units(name: &str) -> Option<&'static str> {
    if let Some(spec) = stocks::LAYOUT.iter().find(|s| s.name == name) {
        return Some(spec.units);
    }
    Some(match name {
        "covid_effect" | "processing_factor" | "filing_factor" | "burden" | "E_r" | "E_es" | "E_m" | "E_or"
        | "crowding" | "E_cr" | "conflict" => "dimensionless",
        "months_behind" => "months",
        "r_d" | "r_p" | "era_payment" | "arrears_writeoff" | "m_d" | "m_p" => "dollars/month",
        "e_f" | "e_p" | "e_r" | "t_m" | "t_n" | "f_o" | "f_uo" | "f_s" | "s_d" => "rental units/month",
        "i_new" | "i_stbl" | "h_new" | "h_ent" | "h_exit" | "h_du" | "h_stbl" => "households/month",
        _ => return None,
    })
}

impl FlowRecord {
    pub fn series(&self, name: &str) -> Option<f64> {
        Some(match name {
            "covid_effect" => self.covid_effect,
            "processing_factor" => self.processing_factor,
            "filing_factor" => self.filing_factor,
            "burden" => self.burden,
            "E_r" => self.rent_delay_effect,
            "months_behind" => self.months_behind,
            "E_es" => self.stress_effect,
            "E_m" => self.mortgage_effect,
            "E_or" => self.overdue_effect,
            "crowding" => self.crowding,
            "E_cr" => self.crowding_effect,
            "conflict" => self.conflict,
            "r_d" => self.rent_due_new,
            "r_p" => self.rent_paid,
            "era_payment" => self.era_payment,
            "arrears_writeoff" => self.arrears_writeoff,
            "m_d" => self.mortgage_due_new,
            "m_p" => self.mortgage_paid,
            "e_f" => self.filings,
            "e_p" => self.processed,
            "e_r" => self.resolved,
            "t_m" => self.moving_out,
            "t_n" => self.moving_in,
            "f_o" => self.foreclosed,
            "f_uo" => self.foreclosed_unoccupied,
            "f_s" => self.sales,
            "s_d" => self.decline,
            "i_new" => self.new_insecure,
            "i_stbl" => self.stabilizing_insecure,
            "h_new" => self.new_homeless,
            "h_ent" => self.entering_homeless,
            "h_exit" => self.exiting_homeless,
            "h_du" => self.doubling_up,
            "h_stbl" => self.stabilizing_homeless,
            _ => return None,
        })
    }
}

/// The housing model bound to one parameter set.
#[derive(Debug, Clone)]
pub struct HousingModel {
    pub params: ModelParams,
}

pub type HousingTrajectory = Trajectory<FlowRecord>;

impl HousingModel {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }

    pub fn initial_state(&self) -> StateVector {
        HousingStocks::initial(&self.params).to_state()
    }

    pub fn run(&self, clock: &SimClock) -> Result<HousingTrajectory, SimError> {
        simulate(self, clock, self.initial_state())
    }

    /// Net derivatives and the limited flows at one point.
    pub fn flows(&self, s: &HousingStocks, t: f64, dt: f64) -> (HousingStocks, FlowRecord, Guards) {
        let p = &self.params;
        let mut guards = Guards::default();

        let covid = flows::covid_shock(p, s.covid_smooth, t);
        let (processing_factor, filing_factor) = flows::moratorium_factors(p, s.filing_smooth, t);
        let delay = flows::rent_delay(s, p, covid, &mut guards);
        let era = flows::era_flows(s, p, t, dt);
        let months_behind = flows::months_behind(s, p);
        let stress = p.curves.stress.eval(months_behind);
        let tenant_payments = s.rent_due / delay.avg_time;
        let mortgage = flows::mortgage_flows(s, p, tenant_payments + era, &mut guards);
        let crowd = flows::crowding_and_conflict(s, p, stress);
        let (mut filings, overdue) =
            flows::eviction_filing_flow(s, p, mortgage.effect, crowd.conflict, filing_factor, &mut guards);
        let mut processed = flows::eviction_processing_flow(s, p, covid, processing_factor);
        let UnitFlows {
            mut resolving,
            mut moving_out,
            mut moving_in,
            foreclosed_occupied: mut fo_occ,
            foreclosed_pending: mut fo_pend,
            foreclosed_unoccupied: mut fuo,
            mut sales,
            mut decline,
        } = flows::unit_flows(s, p, stress, mortgage.effect, delay.effect);

        flows::limit_outflows(s.units_occupied, dt, &mut [&mut moving_out, &mut fo_occ, &mut filings]);
        flows::limit_outflows(s.units_pending, dt, &mut [&mut processed, &mut resolving, &mut fo_pend]);
        flows::limit_outflows(s.units_unoccupied, dt, &mut [&mut moving_in, &mut fuo, &mut decline]);
        flows::limit_outflows(s.units_foreclosed, dt, &mut [&mut sales]);

        let foreclosed = fo_occ + fo_pend;
        let mut h = flows::household_flows(s, p, covid, processed, foreclosed, crowd.conflict, &mut guards);
        flows::limit_outflows(
            s.households_insecure,
            dt,
            &mut [&mut h.entering_homeless, &mut h.stabilizing_insecure],
        );
        flows::limit_outflows(
            s.households_homeless,
            dt,
            &mut [&mut h.exiting_homeless, &mut h.doubling_up, &mut h.stabilizing_homeless],
        );

        let mut rent = flows::rent_flows(s, p, &delay, processed + moving_out, &mut guards);
        flows::limit_outflows(
            (s.rent_due - era * dt).max(0.0),
            dt,
            &mut [&mut rent.payments, &mut rent.writeoff],
        );
        let mut mortgage_paid = mortgage.payments;
        flows::limit_outflows(s.mortgage_due, dt, &mut [&mut mortgage_paid]);

        let d = HousingStocks {
            rent_due: rent.due - rent.payments - era - rent.writeoff,
            mortgage_due: mortgage.due - mortgage_paid,
            units_occupied: moving_in + resolving - moving_out - fo_occ - filings,
            units_pending: filings - processed - resolving - fo_pend,
            units_unoccupied: processed + moving_out + sales - moving_in - fuo - decline,
            units_foreclosed: foreclosed + fuo - sales,
            households_insecure: h.new_insecure + h.exiting_homeless + h.doubling_up
                - h.entering_homeless
                - h.stabilizing_insecure,
            households_homeless: h.new_homeless + h.entering_homeless
                - h.exiting_homeless
                - h.doubling_up
                - h.stabilizing_homeless,
            era_funds: -era,
            covid_smooth: flows::covid_smooth_derivative(p, s.covid_smooth, t),
            filing_smooth: flows::filing_smooth_derivative(p, s.filing_smooth, t),
        };

        let record = FlowRecord {
            covid_effect: covid,
            processing_factor,
            filing_factor,
            burden: delay.burden,
            rent_delay_effect: delay.effect,
            months_behind,
            stress_effect: stress,
            mortgage_effect: mortgage.effect,
            overdue_effect: overdue,
            crowding: crowd.ratio,
            crowding_effect: crowd.effect,
            conflict: crowd.conflict,
            rent_due_new: rent.due,
            rent_paid: rent.payments,
            era_payment: era,
            arrears_writeoff: rent.writeoff,
            mortgage_due_new: mortgage.due,
            mortgage_paid,
            filings,
            processed,
            resolved: resolving,
            moving_out,
            moving_in,
            foreclosed,
            foreclosed_unoccupied: fuo,
            sales,
            decline,
            new_insecure: h.new_insecure,
            stabilizing_insecure: h.stabilizing_insecure,
            new_homeless: h.new_homeless,
            entering_homeless: h.entering_homeless,
            exiting_homeless: h.exiting_homeless,
            doubling_up: h.doubling_up,
            stabilizing_homeless: h.stabilizing_homeless,
        };
        (d, record, guards)
    }
}

impl DerivativeModel for HousingModel {
    type Record = FlowRecord;

    fn evaluate(&self, state: &StateVector, t: f64, dt: f64) -> Result<Evaluation<FlowRecord>, SimError> {
        let s = HousingStocks::from_state(state);
        let (d, record, guards) = self.flows(&s, t, dt);
        let diagnostics = guards
            .hits
            .into_iter()
            .map(|subject| Diagnostic {
                time: t,
                kind: DiagnosticKind::EpsilonGuard,
                subject: subject.to_string(),
                value: 0.0,
            })
            .collect();
        Ok(Evaluation {
            derivatives: d.to_state().values().to_vec(),
            record,
            diagnostics,
        })
    }
}
