//! Observed reference modes and their comparison with simulated runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::CalendarMonth;
use crate::error::{Error, Result};
use crate::model::series_units;
use crate::scenarios::{emit_timeseries, RunResult};

use super::theil::{theils_u, TheilStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceSource {
    #[serde(rename = "AHAR")]
    Ahar,
    #[serde(rename = "Eviction Lab")]
    EvictionLab,
    #[serde(rename = "Pulse")]
    Pulse,
    #[serde(rename = "NLIHC")]
    Nlihc,
}

/// Reference files looked for in a reference directory, named
/// `<series>.csv`, with the source each is expected to come from.
pub const EXPECTED_REFERENCES: &[(&str, ReferenceSource)] = &[
    ("e_f", ReferenceSource::EvictionLab),
    ("H_lh", ReferenceSource::Ahar),
    ("R", ReferenceSource::Pulse),
    ("U_occ", ReferenceSource::Nlihc),
];

#[derive(Debug, Deserialize)]
struct Row {
    calendar_month: String,
    value: f64,
    units: String,
    source: ReferenceSource,
}

/// One observed series, monthly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceMode {
    /// Model series the observations are compared with.
    pub series: String,
    pub units: String,
    pub source: ReferenceSource,
    pub observations: Vec<(CalendarMonth, f64)>,
}

impl ReferenceMode {
    /// Loads `<series>.csv`. Rows must share units and source, months must
    /// increase strictly, and the units must match the model series.
    pub fn load(path: &Path) -> Result<Self> {
        let series = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Validation(format!("{}: bad file name", path.display())))?
            .to_string();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&series, &text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    pub fn parse(series: &str, csv_text: &str) -> Result<Self> {
        let expected_units = series_units(series).ok_or_else(|| Error::UnknownSeries(series.to_string()))?;
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let mut observations: Vec<(CalendarMonth, f64)> = Vec::new();
        let mut meta: Option<(String, ReferenceSource)> = None;
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row?;
            let at = |msg: String| Error::Validation(format!("row {}: {msg}", line + 1));
            let month = CalendarMonth::parse(&row.calendar_month)
                .ok_or_else(|| at(format!("bad calendar_month `{}`", row.calendar_month)))?;
            if !row.value.is_finite() {
                return Err(at("non-finite value".into()));
            }
            if row.units != expected_units {
                return Err(at(format!(
                    "units `{}` but `{series}` is in `{expected_units}`",
                    row.units
                )));
            }
            match &meta {
                None => meta = Some((row.units, row.source)),
                Some((_, source)) if *source != row.source => {
                    return Err(at("mixed sources in one file".into()));
                }
                Some(_) => {}
            }
            if let Some((prev, _)) = observations.last() {
                if month.months_since(*prev) <= 0 {
                    return Err(at(format!("{} does not follow {}", month.label(), prev.label())));
                }
            }
            observations.push((month, row.value));
        }
        let (units, source) = meta.ok_or_else(|| Error::Validation("no observations".into()))?;
        Ok(Self {
            series: series.to_string(),
            units,
            source,
            observations,
        })
    }

    /// Theil statistics of `run` against these observations. Each month is
    /// compared with the mean of the simulated samples inside it; months the
    /// run does not cover are dropped.
    pub fn compare(&self, run: &RunResult) -> Result<ReferenceFit> {
        let table = emit_timeseries(run, &[self.series.as_str()])?;
        let clock = &run.trajectory.clock;
        let mut simulated = Vec::new();
        let mut observed = Vec::new();
        for (month, value) in &self.observations {
            let start = month.months_since(clock.start) as f64;
            let inside: Vec<f64> = table
                .times
                .iter()
                .zip(&table.values)
                .filter(|(t, _)| **t >= start - 1e-9 && **t < start + 1.0 - 1e-9)
                .map(|(_, row)| row[0])
                .collect();
            if !inside.is_empty() {
                simulated.push(inside.iter().sum::<f64>() / inside.len() as f64);
                observed.push(*value);
            }
        }
        if simulated.is_empty() {
            return Err(Error::Validation(format!(
                "reference `{}` does not overlap the simulated period",
                self.series
            )));
        }
        Ok(ReferenceFit {
            series: self.series.clone(),
            source: self.source,
            months_compared: simulated.len(),
            months_dropped: self.observations.len() - simulated.len(),
            theil: theils_u(&simulated, &observed)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceFit {
    pub series: String,
    pub source: ReferenceSource,
    pub months_compared: usize,
    pub months_dropped: usize,
    pub theil: TheilStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReferenceOutcome {
    Compared(ReferenceFit),
    Skipped { series: String, reason: String },
}

/// Compares `run` with every expected reference file under `dir`, plus any
/// other `<series>.csv` found there. Missing files are skipped, not errors;
/// malformed ones are errors.
pub fn validate_references(run: &RunResult, dir: &Path) -> Result<Vec<ReferenceOutcome>> {
    let mut files: Vec<(String, PathBuf)> = EXPECTED_REFERENCES
        .iter()
        .map(|(series, _)| (series.to_string(), dir.join(format!("{series}.csv"))))
        .collect();
    if dir.is_dir() {
        let mut extra: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .filter(|p| !files.iter().any(|(_, f)| f == p))
            .collect();
        extra.sort();
        for p in extra {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            files.push((stem, p));
        }
    }
    files
        .into_iter()
        .map(|(series, path)| {
            if !path.is_file() {
                return Ok(ReferenceOutcome::Skipped {
                    series,
                    reason: format!("{} not found", path.display()),
                });
            }
            let mode = ReferenceMode::load(&path)?;
            if let Some((_, expected)) = EXPECTED_REFERENCES.iter().find(|(s, _)| *s == series) {
                if mode.source != *expected {
                    return Err(Error::Validation(format!(
                        "{}: expected source {expected:?}, found {:?}",
                        path.display(),
                        mode.source
                    )));
                }
            }
            Ok(ReferenceOutcome::Compared(mode.compare(run)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimClock;
    use crate::model::ParamSet;
    use crate::scenarios::{run_scenario, ScenarioSet};

    const GOOD: &str = "calendar_month,value,units,source\n\
                        2020-01,580000,households,AHAR\n\
                        2021-01,600000,households,AHAR\n";

    #[test]
    fn parses_a_reference_file() {
        let m = ReferenceMode::parse("H_lh", GOOD).unwrap();
        assert_eq!(m.source, ReferenceSource::Ahar);
        assert_eq!(m.observations[1], (CalendarMonth::new(2021, 1), 600000.0));
    }

    #[test]
    fn rejects_malformed_files() {
        let wrong_units = GOOD.replace("households,AHAR", "units,AHAR");
        assert!(ReferenceMode::parse("H_lh", &wrong_units).is_err());
        let backwards = GOOD.replace("2021-01", "2019-01");
        assert!(ReferenceMode::parse("H_lh", &backwards).is_err());
        let unknown_source = GOOD.replace("AHAR", "Census");
        assert!(ReferenceMode::parse("H_lh", &unknown_source).is_err());
        assert!(ReferenceMode::parse("nope", GOOD).is_err());
        assert!(ReferenceMode::parse("H_lh", "calendar_month,value,units,source\n").is_err());
    }

    fn run4() -> RunResult {
        let set = ScenarioSet::builtin();
        run_scenario(
            set.get("run4").unwrap(),
            &ParamSet::builtin().params,
            &SimClock::default(),
        )
        .unwrap()
    }

    #[test]
    fn comparison_uses_monthly_means() {
        let run = run4();
        let mode = ReferenceMode::parse("H_lh", GOOD).unwrap();
        let fit = mode.compare(&run).unwrap();
        assert_eq!((fit.months_compared, fit.months_dropped), (2, 0));
        let late = GOOD.replace("2021-01", "2030-01");
        let fit = ReferenceMode::parse("H_lh", &late).unwrap().compare(&run).unwrap();
        assert_eq!((fit.months_compared, fit.months_dropped), (1, 1));
    }

    #[test]
    fn missing_references_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("H_lh.csv"), GOOD).unwrap();
        let out = validate_references(&run4(), dir.path()).unwrap();
        assert_eq!(out.len(), EXPECTED_REFERENCES.len());
        let compared = out
            .iter()
            .filter(|o| matches!(o, ReferenceOutcome::Compared(_)))
            .count();
        assert_eq!(compared, 1);
        let gone = validate_references(&run4(), &dir.path().join("absent")).unwrap();
        assert!(gone.iter().all(|o| matches!(o, ReferenceOutcome::Skipped { .. })));
    }
}
