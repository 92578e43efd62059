//! Model constants and the provenance-tagged parameter file.
//!
//! Every numeric constant lives in [`ModelParams`] and is addressable by a
//! dotted key (`rent.avg_monthly_rent`, `curves.stress.growth`, ...). The
//! key registry drives file I/O, sensitivity sweeps and calibration, so a
//! constant added here is picked up by all three.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{GompertzCurve, LogisticCurve};
use crate::error::ParamError;

/// The parameter file shipped with the repository; used when no path is given.
pub const DEFAULT_PARAMS_TOML: &str = include_str!("../../../../params/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RentParams {
    pub avg_monthly_rent: f64,
    pub avg_household_income: f64,
    pub rent_burden_threshold: f64,
    pub at_rent_base: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandlordParams {
    pub avg_monthly_mortgage: f64,
    pub at_mortgage_base: f64,
    pub landlord_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvictionParams {
    pub proc_proportion: f64,
    pub at_process: f64,
    pub filing_resolution_time: f64,
    pub baseline_filing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitParams {
    pub baseline_turnover_fraction: f64,
    pub foreclosure_fraction_occupied: f64,
    pub foreclosure_fraction_unoccupied: f64,
    pub foreclosure_sale_time: f64,
    pub move_in_time: f64,
    pub stock_decline_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdParams {
    pub crowding_reference: f64,
    /// Share of displaced households that become literally homeless; the
    /// remainder double up and stay housing insecure.
    pub homeless_entry_fraction: f64,
    /// Fraction of insecure households per month pushed into homelessness per
    /// unit of excess household conflict.
    pub conflict_entry_fraction: f64,
    pub rate_new_insecurity: f64,
    pub rate_new_homelessness: f64,
    pub fr_stabilize_insecure: f64,
    pub fr_stabilize_homeless: f64,
    pub fr_exit_homeless: f64,
    pub fr_double_up_homeless: f64,
}

impl HouseholdParams {
    pub fn doubling_up_fraction(&self) -> f64 {
        1.0 - self.homeless_entry_fraction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovidParams {
    pub magnitude: f64,
    pub start_time: f64,
    pub recovery_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoratoriumParams {
    pub effect_size: f64,
    pub start_time: f64,
    pub duration: f64,
    pub filing_reduction: f64,
    pub filing_recovery_delay: f64,
    /// Months after the moratorium ends before filings start to recover.
    pub filing_resume_lag: f64,
}

impl MoratoriumParams {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraParams {
    pub total_funds: f64,
    pub start_time: f64,
    /// Months needed to pay out the whole allocation at the base rate.
    pub disbursement_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub stress: GompertzCurve,
    pub rent_delay: GompertzCurve,
    pub mortgage_delay: LogisticCurve,
    pub crowding: LogisticCurve,
}

/// Initial stock levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStocks {
    pub rent_due: f64,
    pub mortgage_due: f64,
    pub units_occupied: f64,
    pub units_pending: f64,
    pub units_unoccupied: f64,
    pub units_foreclosed: f64,
    pub households_insecure: f64,
    pub households_homeless: f64,
}

/// Scenario switches. Not part of the parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySwitches {
    pub covid: bool,
    pub moratorium: bool,
    pub era: bool,
    pub era_rate_multiplier: f64,
}

impl Default for PolicySwitches {
    fn default() -> Self {
        Self {
            covid: false,
            moratorium: false,
            era: false,
            era_rate_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rent: RentParams,
    pub landlord: LandlordParams,
    pub eviction: EvictionParams,
    pub units: UnitParams,
    pub households: HouseholdParams,
    pub covid: CovidParams,
    pub moratorium: MoratoriumParams,
    pub era: EraParams,
    pub curves: CurveParams,
    pub initial: InitialStocks,
    #[serde(default)]
    pub switches: PolicySwitches,
}

/// What a parameter measures; drives validation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamKind {
    /// Nonnegative quantity (dollars, counts, rates).
    Level,
    /// Used as a divisor (times, delays, references); must be > 0.
    Positive,
    /// A calendar time in months; nonnegative.
    Timing,
    /// Dimensionless share in [0, 1].
    Fraction,
    /// Curve shape constant, checked by the curve's own validation.
    Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamDef {
    pub key: &'static str,
    pub units: &'static str,
    pub kind: ParamKind,
}

macro_rules! param_registry {
    ($( $key:literal => $($field:ident).+ , $units:literal, $kind:ident; )*) => {
        /// Every numeric parameter, in file order.
        pub const PARAM_DEFS: &[ParamDef] = &[
            $( ParamDef { key: $key, units: $units, kind: ParamKind::$kind }, )*
        ];

        impl ModelParams {
            pub fn get(&self, key: &str) -> Option<f64> {
                match key {
                    $( $key => Some(self.$($field).+), )*
                    _ => None,
                }
            }

            pub fn slot_mut(&mut self, key: &str) -> Option<&mut f64> {
                match key {
                    $( $key => Some(&mut self.$($field).+), )*
                    _ => None,
                }
            }
        }
    };
}

param_registry! {
    "rent.avg_monthly_rent" => rent.avg_monthly_rent, "dollars/unit/month", Level;
    "rent.avg_household_income" => rent.avg_household_income, "dollars/household/month", Level;
    "rent.rent_burden_threshold" => rent.rent_burden_threshold, "dimensionless", Fraction;
    "rent.at_rent_base" => rent.at_rent_base, "months", Positive;
    "landlord.avg_monthly_mortgage" => landlord.avg_monthly_mortgage, "dollars/unit/month", Level;
    "landlord.at_mortgage_base" => landlord.at_mortgage_base, "months", Positive;
    "landlord.landlord_tolerance" => landlord.landlord_tolerance, "dollars/unit", Level;
    "eviction.proc_proportion" => eviction.proc_proportion, "dimensionless", Fraction;
    "eviction.at_process" => eviction.at_process, "months", Positive;
    "eviction.filing_resolution_time" => eviction.filing_resolution_time, "months", Positive;
    "eviction.baseline_filing_fraction" => eviction.baseline_filing_fraction, "1/month", Fraction;
    "units.baseline_turnover_fraction" => units.baseline_turnover_fraction, "1/month", Fraction;
    "units.foreclosure_fraction_occupied" => units.foreclosure_fraction_occupied, "1/month", Fraction;
    "units.foreclosure_fraction_unoccupied" => units.foreclosure_fraction_unoccupied, "1/month", Fraction;
    "units.foreclosure_sale_time" => units.foreclosure_sale_time, "months", Positive;
    "units.move_in_time" => units.move_in_time, "months", Positive;
    "units.stock_decline_fraction" => units.stock_decline_fraction, "1/month", Fraction;
    "households.crowding_reference" => households.crowding_reference, "households/unit", Positive;
    "households.homeless_entry_fraction" => households.homeless_entry_fraction, "dimensionless", Fraction;
    "households.conflict_entry_fraction" => households.conflict_entry_fraction, "1/month", Fraction;
    "households.rate_new_insecurity" => households.rate_new_insecurity, "households/month", Level;
    "households.rate_new_homelessness" => households.rate_new_homelessness, "households/month", Level;
    "households.fr_stabilize_insecure" => households.fr_stabilize_insecure, "1/month", Fraction;
    "households.fr_stabilize_homeless" => households.fr_stabilize_homeless, "1/month", Fraction;
    "households.fr_exit_homeless" => households.fr_exit_homeless, "1/month", Fraction;
    "households.fr_double_up_homeless" => households.fr_double_up_homeless, "1/month", Fraction;
    "covid.magnitude" => covid.magnitude, "dimensionless", Fraction;
    "covid.start_time" => covid.start_time, "months", Timing;
    "covid.recovery_delay" => covid.recovery_delay, "months", Positive;
    "moratorium.effect_size" => moratorium.effect_size, "dimensionless", Fraction;
    "moratorium.start_time" => moratorium.start_time, "months", Timing;
    "moratorium.duration" => moratorium.duration, "months", Positive;
    "moratorium.filing_reduction" => moratorium.filing_reduction, "dimensionless", Fraction;
    "moratorium.filing_recovery_delay" => moratorium.filing_recovery_delay, "months", Positive;
    "moratorium.filing_resume_lag" => moratorium.filing_resume_lag, "months", Timing;
    "era.total_funds" => era.total_funds, "dollars", Level;
    "era.start_time" => era.start_time, "months", Timing;
    "era.disbursement_time" => era.disbursement_time, "months", Positive;
    "curves.stress.asymptote" => curves.stress.asymptote, "dimensionless", Shape;
    "curves.stress.intercept" => curves.stress.intercept, "dimensionless", Shape;
    "curves.stress.growth" => curves.stress.growth, "dimensionless", Shape;
    "curves.stress.floor" => curves.stress.floor, "dimensionless", Shape;
    "curves.rent_delay.asymptote" => curves.rent_delay.asymptote, "dimensionless", Shape;
    "curves.rent_delay.intercept" => curves.rent_delay.intercept, "dimensionless", Shape;
    "curves.rent_delay.growth" => curves.rent_delay.growth, "dimensionless", Shape;
    "curves.rent_delay.floor" => curves.rent_delay.floor, "dimensionless", Shape;
    "curves.mortgage_delay.y_max" => curves.mortgage_delay.y_max, "dimensionless", Shape;
    "curves.mortgage_delay.y_min" => curves.mortgage_delay.y_min, "dimensionless", Shape;
    "curves.mortgage_delay.inflection" => curves.mortgage_delay.inflection, "dimensionless", Shape;
    "curves.mortgage_delay.slope" => curves.mortgage_delay.slope, "dimensionless", Shape;
    "curves.crowding.y_max" => curves.crowding.y_max, "dimensionless", Shape;
    "curves.crowding.y_min" => curves.crowding.y_min, "dimensionless", Shape;
    "curves.crowding.inflection" => curves.crowding.inflection, "dimensionless", Shape;
    "curves.crowding.slope" => curves.crowding.slope, "dimensionless", Shape;
    "initial.rent_due" => initial.rent_due, "dollars", Level;
    "initial.mortgage_due" => initial.mortgage_due, "dollars", Level;
    "initial.units_occupied" => initial.units_occupied, "rental units", Level;
    "initial.units_pending" => initial.units_pending, "rental units", Level;
    "initial.units_unoccupied" => initial.units_unoccupied, "rental units", Level;
    "initial.units_foreclosed" => initial.units_foreclosed, "rental units", Level;
    "initial.households_insecure" => initial.households_insecure, "households", Level;
    "initial.households_homeless" => initial.households_homeless, "households", Level;
}

pub fn param_def(key: &str) -> Option<&'static ParamDef> {
    PARAM_DEFS.iter().find(|d| d.key == key)
}

impl ModelParams {
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ParamError> {
        let slot = self.slot_mut(key).ok_or_else(|| ParamError::Unknown(key.to_string()))?;
        *slot = value;
        Ok(())
    }

    /// Checks sign, range and curve invariants.
    pub fn validate(&self) -> Result<(), ParamError> {
        for def in PARAM_DEFS {
            let v = self.get(def.key).expect("registry keys resolve");
            let bad = |reason: &str| {
                Err(ParamError::Invalid {
                    key: def.key.to_string(),
                    reason: format!("{reason}, got {v}"),
                })
            };
            if !v.is_finite() {
                return bad("must be finite");
            }
            match def.kind {
                ParamKind::Level | ParamKind::Timing if v < 0.0 => return bad("must be >= 0"),
                ParamKind::Positive if v <= 0.0 => return bad("must be > 0"),
                ParamKind::Fraction if !(0.0..=1.0).contains(&v) => return bad("must lie in [0, 1]"),
                _ => {}
            }
        }
        let threshold = self.rent.rent_burden_threshold;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ParamError::Invalid {
                key: "rent.rent_burden_threshold".into(),
                reason: format!("must lie in (0, 1), got {threshold}"),
            });
        }
        if !(self.switches.era_rate_multiplier > 0.0 && self.switches.era_rate_multiplier.is_finite()) {
            return Err(ParamError::Invalid {
                key: "era.rate_multiplier".into(),
                reason: "must be > 0".into(),
            });
        }
        self.curves.stress.validate("curves.stress")?;
        self.curves.rent_delay.validate("curves.rent_delay")?;
        self.curves.mortgage_delay.validate("curves.mortgage_delay")?;
        self.curves.crowding.validate("curves.crowding")?;
        Ok(())
    }
}

/// Where a parameter value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Paper,
    CitedSource,
    Assumption,
    Calibrated,
    /// Solved so the pre-shock model is stationary.
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub units: String,
    pub source: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    value: toml::Value,
    units: Option<String>,
    source: Provenance,
    note: Option<String>,
}

/// Parameter values together with their units and provenance tags.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub params: ModelParams,
    pub meta: BTreeMap<String, ParamMeta>,
}

impl ParamSet {
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_PARAMS_TOML).expect("shipped parameter file parses")
    }

    pub fn load(path: &Path) -> Result<Self, ParamError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParamError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ParamError> {
        let root: toml::Table = toml::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))?;
        let mut found = BTreeMap::new();
        collect_entries(&root, String::new(), &mut found)?;

        let mut params = placeholder();
        let mut meta = BTreeMap::new();
        for def in PARAM_DEFS {
            let entry = found
                .remove(def.key)
                .ok_or_else(|| ParamError::Missing(def.key.to_string()))?;
            let value = match entry.value {
                toml::Value::Float(f) => f,
                toml::Value::Integer(i) => i as f64,
                other => {
                    return Err(ParamError::Invalid {
                        key: def.key.to_string(),
                        reason: format!("value must be numeric, got {other}"),
                    })
                }
            };
            params.set(def.key, value)?;
            let units = entry.units.unwrap_or_else(|| def.units.to_string());
            if units != def.units {
                return Err(ParamError::Invalid {
                    key: def.key.to_string(),
                    reason: format!("units `{units}` do not match expected `{}`", def.units),
                });
            }
            meta.insert(
                def.key.to_string(),
                ParamMeta {
                    units,
                    source: entry.source,
                    note: entry.note,
                },
            );
        }
        if let Some(key) = found.keys().next() {
            return Err(ParamError::Unknown(key.clone()));
        }
        params.validate()?;
        Ok(Self { params, meta })
    }

    /// Serialize in registry order, one inline table per parameter.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::from(
            "# Model parameters. Each entry carries its units and a provenance tag:\n\
             # paper | cited-source | assumption | calibrated | equilibrium\n",
        );
        let mut section = "";
        for def in PARAM_DEFS {
            let (group, name) = def.key.rsplit_once('.').expect("keys are dotted");
            if group != section {
                let _ = write!(out, "\n[{group}]\n");
                section = group;
            }
            let value = self.params.get(def.key).expect("registry keys resolve");
            let meta = self.meta.get(def.key);
            let source = meta.map(|m| m.source).unwrap_or(Provenance::Assumption);
            let source = serde_json::to_value(source).expect("enum serializes");
            let _ = write!(
                out,
                "{name} = {{ value = {value:?}, units = \"{}\", source = \"{}\"",
                def.units,
                source.as_str().unwrap_or("assumption")
            );
            if let Some(note) = meta.and_then(|m| m.note.as_deref()) {
                let _ = write!(out, ", note = {}", toml::Value::String(note.to_string()));
            }
            out.push_str(" }\n");
        }
        out
    }

    pub fn set_calibrated(&mut self, key: &str, value: f64) -> Result<(), ParamError> {
        self.set_with_source(key, value, Provenance::Calibrated)
    }

    /// Sets a value and retags its provenance, keeping any note.
    pub fn set_with_source(&mut self, key: &str, value: f64, source: Provenance) -> Result<(), ParamError> {
        self.params.set(key, value)?;
        let def = param_def(key).ok_or_else(|| ParamError::Unknown(key.to_string()))?;
        let entry = self.meta.entry(key.to_string()).or_insert_with(|| ParamMeta {
            units: def.units.to_string(),
            source,
            note: None,
        });
        entry.source = source;
        Ok(())
    }

    /// Every parameter value with its key, in registry order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        PARAM_DEFS
            .iter()
            .map(|d| (d.key, self.params.get(d.key).expect("registry keys resolve")))
            .collect()
    }
}

fn collect_entries(
    table: &toml::Table,
    prefix: String,
    out: &mut BTreeMap<String, RawEntry>,
) -> Result<(), ParamError> {
    for (name, value) in table {
        let key = if prefix.is_empty() {
            name.clone()
        } else {
            format!("{prefix}.{name}")
        };
        let toml::Value::Table(inner) = value else {
            return Err(ParamError::Parse(format!("`{key}` must be a table")));
        };
        if inner.contains_key("value") {
            let entry: RawEntry = inner
                .clone()
                .try_into()
                .map_err(|e| ParamError::Parse(format!("`{key}`: {e}")))?;
            out.insert(key, entry);
        } else {
            collect_entries(inner, key, out)?;
        }
    }
    Ok(())
}

fn placeholder() -> ModelParams {
    let gompertz = GompertzCurve {
        asymptote: 0.0,
        intercept: 0.0,
        growth: 0.0,
        floor: 0.0,
    };
    let logistic = LogisticCurve {
        y_max: 0.0,
        y_min: 0.0,
        inflection: 0.0,
        slope: 0.0,
    };
    ModelParams {
        rent: RentParams {
            avg_monthly_rent: 0.0,
            avg_household_income: 0.0,
            rent_burden_threshold: 0.0,
            at_rent_base: 0.0,
        },
        landlord: LandlordParams {
            avg_monthly_mortgage: 0.0,
            at_mortgage_base: 0.0,
            landlord_tolerance: 0.0,
        },
        eviction: EvictionParams {
            proc_proportion: 0.0,
            at_process: 0.0,
            filing_resolution_time: 0.0,
            baseline_filing_fraction: 0.0,
        },
        units: UnitParams {
            baseline_turnover_fraction: 0.0,
            foreclosure_fraction_occupied: 0.0,
            foreclosure_fraction_unoccupied: 0.0,
            foreclosure_sale_time: 0.0,
            move_in_time: 0.0,
            stock_decline_fraction: 0.0,
        },
        households: HouseholdParams {
            crowding_reference: 0.0,
            homeless_entry_fraction: 0.0,
            conflict_entry_fraction: 0.0,
            rate_new_insecurity: 0.0,
            rate_new_homelessness: 0.0,
            fr_stabilize_insecure: 0.0,
            fr_stabilize_homeless: 0.0,
            fr_exit_homeless: 0.0,
            fr_double_up_homeless: 0.0,
        },
        covid: CovidParams {
            magnitude: 0.0,
            start_time: 0.0,
            recovery_delay: 0.0,
        },
        moratorium: MoratoriumParams {
            effect_size: 0.0,
            start_time: 0.0,
            duration: 0.0,
            filing_reduction: 0.0,
            filing_recovery_delay: 0.0,
            filing_resume_lag: 0.0,
        },
        era: EraParams {
            total_funds: 0.0,
            start_time: 0.0,
            disbursement_time: 0.0,
        },
        curves: CurveParams {
            stress: gompertz,
            rent_delay: gompertz,
            mortgage_delay: logistic,
            crowding: logistic,
        },
        initial: InitialStocks {
            rent_due: 0.0,
            mortgage_due: 0.0,
            units_occupied: 0.0,
            units_pending: 0.0,
            units_unoccupied: 0.0,
            units_foreclosed: 0.0,
            households_insecure: 0.0,
            households_homeless: 0.0,
        },
        switches: PolicySwitches::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_file_parses_and_validates() {
        let set = ParamSet::builtin();
        assert_eq!(set.meta.len(), PARAM_DEFS.len());
        assert_eq!(set.params.eviction.proc_proportion, 0.38);
        assert_eq!(set.params.moratorium.effect_size, 0.9);
        assert_eq!(set.params.moratorium.duration, 18.0);
        assert_eq!(set.params.era.total_funds, 46.5e9);
        assert_eq!(set.params.curves.stress.intercept, -108.2);
    }

    #[test]
    fn file_round_trips() {
        let set = ParamSet::builtin();
        let text = set.to_toml_string();
        let back = ParamSet::from_toml_str(&text).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn missing_and_unknown_keys_are_rejected() {
        let text = ParamSet::builtin().to_toml_string();
        let without = text
            .lines()
            .filter(|l| !l.starts_with("avg_monthly_rent"))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(
            ParamSet::from_toml_str(&without),
            Err(ParamError::Missing(k)) if k == "rent.avg_monthly_rent"
        ));
        let extra = format!("{text}\n[bogus]\nthing = {{ value = 1.0, source = \"assumption\" }}\n");
        assert!(matches!(ParamSet::from_toml_str(&extra), Err(ParamError::Unknown(_))));
    }

    #[test]
    fn range_violations_are_rejected() {
        let mut p = ParamSet::builtin().params;
        p.moratorium.effect_size = 1.2;
        assert!(p.validate().is_err());
        let mut p = ParamSet::builtin().params;
        p.eviction.at_process = 0.0;
        assert!(p.validate().is_err());
        let mut p = ParamSet::builtin().params;
        p.rent.rent_burden_threshold = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn every_registry_key_is_addressable() {
        let mut p = ParamSet::builtin().params;
        for def in PARAM_DEFS {
            let v = p.get(def.key).unwrap();
            p.set(def.key, v).unwrap();
        }
        assert!(p.set("nope.nothing", 1.0).is_err());
    }
}
