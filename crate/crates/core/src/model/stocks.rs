use crate::engine::{StateVector, StockSpec};

use super::params::ModelParams;

/// Index of each stock in the housing model's state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stock {
    RentDue,
    MortgageDue,
    UnitsOccupied,
    UnitsPending,
    UnitsUnoccupied,
    UnitsForeclosed,
    HouseholdsInsecure,
    HouseholdsHomeless,
    EraFunds,
    CovidSmooth,
    FilingSmooth,
}

impl Stock {
    pub const ALL: [Stock; 11] = [
        Stock::RentDue,
        Stock::MortgageDue,
        Stock::UnitsOccupied,
        Stock::UnitsPending,
        Stock::UnitsUnoccupied,
        Stock::UnitsForeclosed,
        Stock::HouseholdsInsecure,
        Stock::HouseholdsHomeless,
        Stock::EraFunds,
        Stock::CovidSmooth,
        Stock::FilingSmooth,
    ];

    pub const UNITS: [Stock; 4] = [
        Stock::UnitsOccupied,
        Stock::UnitsPending,
        Stock::UnitsUnoccupied,
        Stock::UnitsForeclosed,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn id(self) -> &'static str {
        LAYOUT[self.index()].name
    }

    pub fn from_id(id: &str) -> Option<Stock> {
        Stock::ALL.into_iter().find(|s| s.id() == id)
    }
}

pub static LAYOUT: [StockSpec; 11] = [
    StockSpec {
        name: "R",
        units: "dollars",
        non_negative: true,
    },
    StockSpec {
        name: "M",
        units: "dollars",
        non_negative: true,
    },
    StockSpec {
        name: "U_occ",
        units: "rental units",
        non_negative: true,
    },
    StockSpec {
        name: "U_pend",
        units: "rental units",
        non_negative: true,
    },
    StockSpec {
        name: "U_unocc",
        units: "rental units",
        non_negative: true,
    },
    StockSpec {
        name: "U_fore",
        units: "rental units",
        non_negative: true,
    },
    StockSpec {
        name: "H_hi",
        units: "households",
        non_negative: true,
    },
    StockSpec {
        name: "H_lh",
        units: "households",
        non_negative: true,
    },
    StockSpec {
        name: "ERA",
        units: "dollars",
        non_negative: true,
    },
    StockSpec {
        name: "covid_smooth",
        units: "dimensionless",
        non_negative: false,
    },
    StockSpec {
        name: "filing_smooth",
        units: "dimensionless",
        non_negative: false,
    },
];

/// Named view over a housing state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HousingStocks {
    pub rent_due: f64,
    pub mortgage_due: f64,
    pub units_occupied: f64,
    pub units_pending: f64,
    pub units_unoccupied: f64,
    pub units_foreclosed: f64,
    pub households_insecure: f64,
    pub households_homeless: f64,
    pub era_funds: f64,
    pub covid_smooth: f64,
    pub filing_smooth: f64,
}

impl HousingStocks {
    pub fn from_state(state: &StateVector) -> Self {
        let v = |s: Stock| state.get(s.index());
        Self {
            rent_due: v(Stock::RentDue),
            mortgage_due: v(Stock::MortgageDue),
            units_occupied: v(Stock::UnitsOccupied),
            units_pending: v(Stock::UnitsPending),
            units_unoccupied: v(Stock::UnitsUnoccupied),
            units_foreclosed: v(Stock::UnitsForeclosed),
            households_insecure: v(Stock::HouseholdsInsecure),
            households_homeless: v(Stock::HouseholdsHomeless),
            era_funds: v(Stock::EraFunds),
            covid_smooth: v(Stock::CovidSmooth),
            filing_smooth: v(Stock::FilingSmooth),
        }
    }

    pub fn to_state(self) -> StateVector {
        StateVector::from_values(
            &LAYOUT,
            vec![
                self.rent_due,
                self.mortgage_due,
                self.units_occupied,
                self.units_pending,
                self.units_unoccupied,
                self.units_foreclosed,
                self.households_insecure,
                self.households_homeless,
                self.era_funds,
                self.covid_smooth,
                self.filing_smooth,
            ],
        )
    }

    /// Initial state from the parameter set; ERA funds are present only when
    /// the programme is switched on.
    pub fn initial(params: &ModelParams) -> Self {
        let i = &params.initial;
        Self {
            rent_due: i.rent_due,
            mortgage_due: i.mortgage_due,
            units_occupied: i.units_occupied,
            units_pending: i.units_pending,
            units_unoccupied: i.units_unoccupied,
            units_foreclosed: i.units_foreclosed,
            households_insecure: i.households_insecure,
            households_homeless: i.households_homeless,
            era_funds: if params.switches.era {
                params.era.total_funds
            } else {
                0.0
            },
            covid_smooth: 0.0,
            filing_smooth: 0.0,
        }
    }

    /// Occupied plus pending-eviction units: the units whose tenants owe rent.
    pub fn tenanted_units(&self) -> f64 {
        self.units_occupied + self.units_pending
    }

    /// Units carrying a landlord mortgage (everything but foreclosed stock).
    pub fn mortgaged_units(&self) -> f64 {
        self.tenanted_units() + self.units_unoccupied
    }

    pub fn total_units(&self) -> f64 {
        self.mortgaged_units() + self.units_foreclosed
    }

    pub fn total_households(&self) -> f64 {
        self.households_insecure + self.households_homeless
    }
}
