//! Acceptance gate: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;

use housing_sd::engine::SimClock;
use housing_sd::model::ParamSet;
use housing_sd::scenarios::ScenarioSet;
use housing_sd::validation::acceptance::evaluate;

fn main() -> ExitCode {
    let report = match evaluate(&ParamSet::builtin(), &ScenarioSet::builtin(), &SimClock::default(), 2018) {
        Ok(report) => report,
        Err(e) => {
            println!("[FAIL] acceptance could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let failed: Vec<&str> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if failed.is_empty() {
        println!("acceptance: {} criteria passed", report.criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
