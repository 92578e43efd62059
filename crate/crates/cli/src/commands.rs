use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use serde::Serialize;

use housing_sd::engine::SimClock;
use housing_sd::model::params::DEFAULT_PARAMS_TOML;
use housing_sd::model::ParamSet;
use housing_sd::scenarios::{
    compare, compare_all, emit_timeseries, run_all, run_scenario, series_names, Comparison, MetricSet, RunResult,
    ScenarioSet, DEFAULT_SCENARIOS_TOML,
};
use housing_sd::validation::acceptance::{self, Criterion};
use housing_sd::validation::sensitivity::{sensitivity_sweep, SensitivityReport, SENSITIVITY_METRICS};
use housing_sd::validation::{calibrate, validate_references, CalibrationSpec, ReferenceOutcome};

use crate::output::{now_unix, sha256_hex, write_atomic, Batch, RunManifest};
use crate::{Cli, Command, Format};

/// Loaded inputs shared by every command.
struct Context {
    params: ParamSet,
    params_file: String,
    params_sha256: String,
    scenarios: ScenarioSet,
    scenarios_file: String,
    scenarios_sha256: String,
    clock: SimClock,
    seed: u64,
    format: Format,
}

fn read_or_builtin(path: Option<&Path>, builtin: &str) -> Result<(String, String)> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok((p.display().to_string(), text))
        }
        None => Ok(("<builtin>".to_string(), builtin.to_string())),
    }
}

impl Context {
    fn load(cli: &Cli) -> Result<Self> {
        let (params_file, params_text) = read_or_builtin(cli.params.as_deref(), DEFAULT_PARAMS_TOML)?;
        let params = ParamSet::from_toml_str(&params_text).with_context(|| format!("parameters {params_file}"))?;
        let (scenarios_file, scenarios_text) = read_or_builtin(cli.scenarios.as_deref(), DEFAULT_SCENARIOS_TOML)?;
        let scenarios =
            ScenarioSet::from_toml_str(&scenarios_text).with_context(|| format!("scenarios {scenarios_file}"))?;
        let clock = match cli.dt {
            Some(dt) => SimClock::default().with_dt(dt)?,
            None => SimClock::default(),
        };
        Ok(Self {
            params,
            params_file,
            params_sha256: sha256_hex(params_text.as_bytes()),
            scenarios,
            scenarios_file,
            scenarios_sha256: sha256_hex(scenarios_text.as_bytes()),
            clock,
            seed: cli.seed,
            format: cli.format,
        })
    }

    fn manifest(&self, command: String, scenarios: Vec<String>) -> RunManifest {
        RunManifest {
            tool: "housing-sd",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_unix: now_unix(),
            params_file: self.params_file.clone(),
            params_sha256: self.params_sha256.clone(),
            scenarios_file: self.scenarios_file.clone(),
            scenarios_sha256: self.scenarios_sha256.clone(),
            scenarios,
            references_dir: None,
            dt: self.clock.dt,
            horizon: self.clock.horizon,
            burn_in: self.clock.burn_in,
            seed: self.seed,
            format: self.format.extension().to_string(),
            parameters: self
                .params
                .values()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            outputs: Vec::new(),
        }
    }

    fn all_names(&self) -> Vec<String> {
        self.scenarios.names().into_iter().map(String::from).collect()
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Context::load(&cli)?;
    let out = cli.out.clone();
    match cli.command {
        Command::Simulate { scenario, series } => simulate(&ctx, &out, &scenario, series),
        Command::Suite {
            references,
            validate_against,
        } => suite(&ctx, &out, &references, &validate_against),
        Command::Compare { baseline, variant } => compare_cmd(&ctx, &out, &baseline, &variant),
        Command::Sweep { scenario, delta } => sweep(&ctx, &out, &scenario, delta),
        Command::Validate { references, scenario } => validate(&ctx, &out, &references, &scenario),
        Command::Calibrate { spec, write_params } => calibrate_cmd(&ctx, &out, &spec, write_params.as_deref()),
    }
}

fn timeseries_bytes(run: &RunResult, series: &[String], format: Format) -> Result<Vec<u8>> {
    let table = emit_timeseries(run, series)?;
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            Ok(buf)
        }
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(&table)?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Largest relative change of any non-negative stock between the first and
/// last sample; near zero for a stationary run.
fn max_drift(run: &RunResult) -> f64 {
    let tr = &run.trajectory;
    let (first, last) = (&tr.states[0], tr.last_state());
    first
        .layout()
        .iter()
        .zip(first.values().iter().zip(last.values()))
        .filter(|(spec, _)| spec.non_negative)
        .map(|(_, (a, b))| {
            if a.abs() > 0.0 {
                (b - a).abs() / a.abs()
            } else {
                b.abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    scenario: &'a str,
    description: &'a str,
    metrics: &'a MetricSet,
    max_stock_drift: f64,
    guard_events: usize,
    comparison: Option<Comparison>,
}

fn run_metrics(run: &RunResult, comparison: Option<Comparison>) -> RunMetrics<'_> {
    RunMetrics {
        scenario: run.name(),
        description: &run.scenario.description,
        metrics: &run.metrics,
        max_stock_drift: max_drift(run),
        guard_events: run.metrics.guard_events,
        comparison,
    }
}

fn all_series() -> Vec<String> {
    series_names().into_iter().map(String::from).collect()
}

fn simulate(ctx: &Context, out: &Path, name: &str, series: Option<Vec<String>>) -> Result<ExitCode> {
    let scenario = ctx.scenarios.get(name)?;
    let run = run_scenario(scenario, &ctx.params.params, &ctx.clock)?;
    let comparison = match &scenario.compare_to {
        Some(base) => {
            let baseline = run_scenario(ctx.scenarios.get(base)?, &ctx.params.params, &ctx.clock)?;
            Some(compare(&baseline, &run)?)
        }
        None => None,
    };
    let series = series.unwrap_or_else(all_series);
    let mut batch = Batch::default();
    batch.add(
        format!("{name}_timeseries.{}", ctx.format.extension()),
        timeseries_bytes(&run, &series, ctx.format)?,
    );
    batch.add_json(format!("{name}_metrics.json"), &run_metrics(&run, comparison))?;
    batch.commit(out, ctx.manifest(format!("simulate {name}"), vec![name.to_string()]))?;
    println!(
        "{name}: {:.0} evictions in window, arrears ${:.2}B at end",
        run.metrics.total_evictions,
        run.metrics.arrears_at_end / 1e9
    );
    Ok(ExitCode::SUCCESS)
}

fn comparison_bytes(comparisons: &[Comparison], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(comparisons)?;
            buf.push(b'\n');
            Ok(buf)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "baseline",
                "variant",
                "metric",
                "baseline_value",
                "variant_value",
                "absolute",
                "percent",
            ])?;
            for c in comparisons {
                for d in &c.deltas {
                    w.write_record([
                        c.baseline.clone(),
                        c.variant.clone(),
                        d.metric.to_string(),
                        d.baseline.to_string(),
                        d.variant.to_string(),
                        d.absolute.to_string(),
                        d.percent.map_or(String::new(), |p| p.to_string()),
                    ])?;
                }
            }
            Ok(w.into_inner()?)
        }
    }
}

fn compare_cmd(ctx: &Context, out: &Path, baseline: &str, variant: &str) -> Result<ExitCode> {
    let p = &ctx.params.params;
    let a = run_scenario(ctx.scenarios.get(baseline)?, p, &ctx.clock)?;
    let b = run_scenario(ctx.scenarios.get(variant)?, p, &ctx.clock)?;
    let c = compare(&a, &b)?;
    let mut batch = Batch::default();
    batch.add(
        format!("compare_{baseline}_vs_{variant}.{}", ctx.format.extension()),
        comparison_bytes(std::slice::from_ref(&c), ctx.format)?,
    );
    batch.commit(
        out,
        ctx.manifest(
            format!("compare {baseline} {variant}"),
            vec![baseline.to_string(), variant.to_string()],
        ),
    )?;
    for d in &c.deltas {
        println!(
            "{:<28} {:>16.4e} {:>16.4e} {:>10}",
            d.metric,
            d.baseline,
            d.variant,
            d.percent.map_or("n/a".to_string(), |p| format!("{p:+.2}%"))
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_bytes(report: &SensitivityReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(report)?;
            buf.push(b'\n');
            Ok(buf)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec![
                "parameter".to_string(),
                "base_value".into(),
                "low_value".into(),
                "high_value".into(),
                "capped".into(),
                "max_abs_elasticity".into(),
            ];
            header.extend(SENSITIVITY_METRICS.iter().map(|m| format!("elasticity_{m}")));
            header.push("violations".into());
            w.write_record(&header)?;
            for p in &report.parameters {
                let mut row = vec![
                    p.key.to_string(),
                    p.base_value.to_string(),
                    p.low.value.to_string(),
                    p.high.value.to_string(),
                    p.high.capped.to_string(),
                    p.max_abs_elasticity.to_string(),
                ];
                row.extend(
                    p.elasticities
                        .iter()
                        .map(|(_, e)| e.map_or(String::new(), |v| v.to_string())),
                );
                let violations: Vec<&str> = p
                    .low
                    .violations
                    .iter()
                    .chain(&p.high.violations)
                    .map(String::as_str)
                    .collect();
                row.push(violations.join(" | "));
                w.write_record(&row)?;
            }
            Ok(w.into_inner()?)
        }
    }
}

fn sweep(ctx: &Context, out: &Path, name: &str, delta: f64) -> Result<ExitCode> {
    let scenario = ctx.scenarios.get(name)?;
    let report = sensitivity_sweep(&ctx.params.params, scenario, &ctx.clock, delta)?;
    let mut batch = Batch::default();
    batch.add(
        format!("sweep_{name}.{}", ctx.format.extension()),
        sweep_bytes(&report, ctx.format)?,
    );
    batch.commit(
        out,
        ctx.manifest(format!("sweep {name} {delta}"), vec![name.to_string()]),
    )?;
    for p in report.parameters.iter().take(10) {
        println!("{:<42} {:>10.4}", p.key, p.max_abs_elasticity);
    }
    let flagged = report.violations();
    println!("{} runs, {} flagged", report.runs(), flagged.len());
    for (key, dir, v) in &flagged {
        eprintln!("flagged: {key} {dir}: {v}");
    }
    Ok(if flagged.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn validation_bytes(outcomes: &[ReferenceOutcome], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(outcomes)?;
            buf.push(b'\n');
            Ok(buf)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "series",
                "status",
                "months",
                "u",
                "u_bias",
                "u_variance",
                "u_covariance",
                "detail",
            ])?;
            for o in outcomes {
                match o {
                    ReferenceOutcome::Compared(f) => w.write_record([
                        f.series.clone(),
                        "COMPARED".into(),
                        f.months_compared.to_string(),
                        f.theil.u.to_string(),
                        f.theil.u_bias.to_string(),
                        f.theil.u_variance.to_string(),
                        f.theil.u_covariance.to_string(),
                        format!("{:?}; {} months outside the run", f.source, f.months_dropped),
                    ])?,
                    ReferenceOutcome::Skipped { series, reason } => {
                        w.write_record([series.as_str(), "SKIPPED", "", "", "", "", "", reason.as_str()])?
                    }
                }
            }
            Ok(w.into_inner()?)
        }
    }
}

fn print_validation(outcomes: &[ReferenceOutcome]) {
    for o in outcomes {
        match o {
            ReferenceOutcome::Compared(f) => println!(
                "{:<8} U = {:.4} (bias {:.3}, variance {:.3}, covariance {:.3})",
                f.series, f.theil.u, f.theil.u_bias, f.theil.u_variance, f.theil.u_covariance
            ),
            ReferenceOutcome::Skipped { series, reason } => println!("{series:<8} SKIPPED: {reason}"),
        }
    }
}

fn validate(ctx: &Context, out: &Path, references: &Path, name: &str) -> Result<ExitCode> {
    let run = run_scenario(ctx.scenarios.get(name)?, &ctx.params.params, &ctx.clock)?;
    let outcomes = validate_references(&run, references)?;
    let mut batch = Batch::default();
    batch.add(
        format!("validation.{}", ctx.format.extension()),
        validation_bytes(&outcomes, ctx.format)?,
    );
    let mut manifest = ctx.manifest(format!("validate {name}"), vec![name.to_string()]);
    manifest.references_dir = Some(references.display().to_string());
    batch.commit(out, manifest)?;
    print_validation(&outcomes);
    Ok(ExitCode::SUCCESS)
}

fn calibrate_cmd(ctx: &Context, out: &Path, spec_path: &Path, write_params: Option<&Path>) -> Result<ExitCode> {
    let spec = CalibrationSpec::load(spec_path)?;
    let result = calibrate(&spec, &ctx.params, &ctx.scenarios, &ctx.clock)?;
    let fitted = result.params.to_toml_string();
    let mut batch = Batch::default();
    batch.add("fitted_params.toml", fitted.clone().into_bytes());
    batch.add_json("calibration_report.json", &result.report)?;
    batch.commit(
        out,
        ctx.manifest(format!("calibrate {}", spec_path.display()), ctx.all_names()),
    )?;
    if let Some(path) = write_params {
        write_atomic(path, fitted.as_bytes())?;
    }
    let r = &result.report;
    println!(
        "loss {:.6} -> {:.6} in {} evaluations{}",
        r.initial_loss,
        r.final_loss,
        r.evaluations,
        if r.converged { "" } else { " (not converged)" }
    );
    for t in &r.targets {
        println!(
            "{:<32} target {:>14.6e} achieved {:>14.6e}",
            t.metric, t.target, t.achieved
        );
    }
    if let Some(w) = &r.warning {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
enum TaskStatus {
    Ok,
    Error,
}

#[derive(Serialize)]
struct TaskOutcome {
    task: &'static str,
    status: TaskStatus,
    detail: String,
}

#[derive(Serialize)]
struct SuiteSummary {
    passed: bool,
    tasks: Vec<TaskOutcome>,
    criteria: Vec<Criterion>,
    headline: Option<BTreeMap<&'static str, f64>>,
    validation: Vec<ReferenceOutcome>,
}

fn suite(ctx: &Context, out: &Path, references: &Path, validate_against: &str) -> Result<ExitCode> {
    let p = &ctx.params.params;
    let format = ctx.format;
    let mut batch = Batch::default();
    let mut tasks = Vec::new();
    let mut record = |task: &'static str, r: Result<String>| match r {
        Ok(detail) => tasks.push(TaskOutcome {
            task,
            status: TaskStatus::Ok,
            detail,
        }),
        Err(e) => tasks.push(TaskOutcome {
            task,
            status: TaskStatus::Error,
            detail: format!("{e:#}"),
        }),
    };

    let runs = run_all(&ctx.scenarios, p, &ctx.clock);
    let runs = match runs {
        Ok(runs) => {
            let written: Result<String> = (|| {
                let names = all_series();
                for run in &runs {
                    let name = run.name();
                    batch.add(
                        format!("{name}_timeseries.{}", format.extension()),
                        timeseries_bytes(run, &names, format)?,
                    );
                    let comparison = match run.scenario.compare_to.as_deref() {
                        Some(base) => {
                            let baseline = runs
                                .iter()
                                .find(|r| r.name() == base)
                                .with_context(|| format!("no run named `{base}`"))?;
                            Some(compare(baseline, run)?)
                        }
                        None => None,
                    };
                    batch.add_json(format!("{name}_metrics.json"), &run_metrics(run, comparison))?;
                }
                Ok(format!("{} runs", runs.len()))
            })();
            record("simulations", written);
            runs
        }
        Err(e) => {
            record("simulations", Err(e.into()));
            Vec::new()
        }
    };

    record(
        "comparisons",
        (|| {
            let comparisons = compare_all(&runs)?;
            batch.add(
                format!("comparisons.{}", format.extension()),
                comparison_bytes(&comparisons, format)?,
            );
            Ok(format!("{} comparisons", comparisons.len()))
        })(),
    );

    let mut criteria = Vec::new();
    let mut headline = None;
    record(
        "acceptance",
        (|| {
            let report = acceptance::evaluate(&ctx.params, &ctx.scenarios, &ctx.clock, ctx.seed)?;
            for s in &report.sweeps {
                batch.add(
                    format!("sweep_{}.{}", s.scenario, format.extension()),
                    sweep_bytes(s, format)?,
                );
            }
            batch.add_json("extreme_conditions.json", &report.extreme)?;
            batch.add_json("headline.json", &report.headline)?;
            headline = Some(report.headline.entries().into_iter().collect());
            criteria = report.criteria;
            let failed = criteria.iter().filter(|c| !c.passed).count();
            Ok(format!("{} criteria, {failed} failed", criteria.len()))
        })(),
    );

    let mut validation = Vec::new();
    record(
        "validation",
        (|| {
            let run = runs
                .iter()
                .find(|r| r.name() == validate_against)
                .with_context(|| format!("no run named `{validate_against}`"))?;
            validation = validate_references(run, references)?;
            batch.add(
                format!("validation.{}", format.extension()),
                validation_bytes(&validation, format)?,
            );
            let skipped = validation
                .iter()
                .filter(|o| matches!(o, ReferenceOutcome::Skipped { .. }))
                .count();
            Ok(format!("{} references, {skipped} skipped", validation.len()))
        })(),
    );

    let tasks_ok = tasks.iter().all(|t| matches!(t.status, TaskStatus::Ok));
    let passed = tasks_ok && !criteria.is_empty() && criteria.iter().all(|c| c.passed);
    let mut text = String::new();
    for t in &tasks {
        let status = match t.status {
            TaskStatus::Ok => "OK",
            TaskStatus::Error => "ERROR",
        };
        text.push_str(&format!("task {:<12} {status}: {}\n", t.task, t.detail));
    }
    for c in &criteria {
        text.push_str(&c.line());
        text.push('\n');
    }
    for o in &validation {
        if let ReferenceOutcome::Skipped { series, reason } = o {
            text.push_str(&format!("validation {series}: SKIPPED ({reason})\n"));
        }
    }
    text.push_str(if passed { "suite PASSED\n" } else { "suite FAILED\n" });
    let summary = SuiteSummary {
        passed,
        tasks,
        criteria,
        headline,
        validation,
    };
    batch.add_json("summary.json", &summary)?;
    batch.add("summary.txt", text.clone().into_bytes());
    let mut manifest = ctx.manifest("suite".into(), ctx.all_names());
    manifest.references_dir = Some(references.display().to_string());
    batch.commit(out, manifest)?;
    print!("{text}");
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
