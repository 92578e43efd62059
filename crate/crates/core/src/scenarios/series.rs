use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::stocks::LAYOUT;
use crate::model::FLOW_SERIES;

use super::RunResult;

/// Every selectable series: stocks first, then flows and effects.
pub fn series_names() -> Vec<&'static str> {
    LAYOUT
        .iter()
        .map(|s| s.name)
        .chain(FLOW_SERIES.iter().copied())
        .collect()
}

/// One row per sample: time, calendar month, then the selected series in
/// selection order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesTable {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    pub months: Vec<String>,
    /// `values[row][column]`, excluding the two leading time columns.
    pub values: Vec<Vec<f64>>,
}

impl TimeSeriesTable {
    pub fn header(&self) -> Vec<&str> {
        ["t", "calendar_month"]
            .into_iter()
            .chain(self.columns.iter().map(String::as_str))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        for ((t, month), row) in self.times.iter().zip(&self.months).zip(&self.values) {
            let mut record = vec![t.to_string(), month.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Selects series from a run. Unknown names are an error; an empty
/// selection gives a header-only table.
pub fn emit_timeseries<S: AsRef<str>>(result: &RunResult, selection: &[S]) -> Result<TimeSeriesTable> {
    enum Source {
        Stock(usize),
        Flow(String),
    }
    let sources = selection
        .iter()
        .map(|name| {
            let name = name.as_ref();
            if let Some(i) = LAYOUT.iter().position(|s| s.name == name) {
                Ok(Source::Stock(i))
            } else if FLOW_SERIES.contains(&name) {
                Ok(Source::Flow(name.to_string()))
            } else {
                Err(Error::UnknownSeries(name.to_string()))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let tr = &result.trajectory;
    if sources.is_empty() {
        return Ok(TimeSeriesTable {
            columns: Vec::new(),
            times: Vec::new(),
            months: Vec::new(),
            values: Vec::new(),
        });
    }
    let values = tr
        .states
        .iter()
        .zip(&tr.records)
        .map(|(state, record)| {
            sources
                .iter()
                .map(|s| match s {
                    Source::Stock(i) => state.get(*i),
                    Source::Flow(name) => record.series(name).expect("flow names were checked"),
                })
                .collect()
        })
        .collect();
    Ok(TimeSeriesTable {
        columns: selection.iter().map(|s| s.as_ref().to_string()).collect(),
        times: tr.times.clone(),
        months: tr.times.iter().map(|t| tr.clock.calendar_label(*t)).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimClock;
    use crate::model::ParamSet;
    use crate::scenarios::{run_scenario, ScenarioSet};

    fn run3() -> RunResult {
        let params = ParamSet::builtin().params;
        let s = ScenarioSet::builtin().get("run3").unwrap().clone();
        run_scenario(&s, &params, &SimClock::default()).unwrap()
    }

    #[test]
    fn every_listed_series_resolves() {
        let r = run3();
        let names = series_names();
        let table = emit_timeseries(&r, &names).unwrap();
        assert_eq!(table.values.len(), 201);
        assert_eq!(table.values[0].len(), names.len());
    }

    #[test]
    fn empty_selection_is_header_only() {
        let r = run3();
        let table = emit_timeseries::<&str>(&r, &[]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,calendar_month\n");
    }

    #[test]
    fn unknown_series_is_an_error() {
        let r = run3();
        assert!(matches!(
            emit_timeseries(&r, &["R", "bogus"]),
            Err(Error::UnknownSeries(n)) if n == "bogus"
        ));
    }

    #[test]
    fn rows_carry_calendar_labels() {
        let r = run3();
        let table = emit_timeseries(&r, &["R", "e_p"]).unwrap();
        let k = r.trajectory.index_at(26.75);
        assert_eq!(table.months[k], "2020-03");
        assert_eq!(table.months[200], "2022-03");
        assert_eq!(table.header(), ["t", "calendar_month", "R", "e_p"]);
    }
}
