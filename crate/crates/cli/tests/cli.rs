use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn housing_sd(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_housing-sd"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1600000000")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn simulate_baseline_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let out = housing_sd(dir.path(), &["simulate", "--scenario", "run1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        listing(dir.path()),
        ["manifest.json", "run1_metrics.json", "run1_timeseries.csv"]
    );
    let metrics = json(&dir.path().join("run1_metrics.json"));
    assert!(metrics["max_stock_drift"].as_f64().unwrap() < 1e-9);
    assert!(metrics["comparison"].is_null());

    let csv = fs::read_to_string(dir.path().join("run1_timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,calendar_month,R,"));
    assert_eq!(lines.count(), 201);
}

#[test]
fn simulate_moratorium_reports_its_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = housing_sd(dir.path(), &["--format", "json", "simulate", "--scenario", "run3"]);
    assert!(out.status.success());
    let metrics = json(&dir.path().join("run3_metrics.json"));
    assert_eq!(metrics["comparison"]["baseline"], "run2");
    let deltas = metrics["comparison"]["deltas"].as_array().unwrap();
    let evictions = deltas.iter().find(|d| d["metric"] == "total_evictions").unwrap();
    let pct = evictions["percent"].as_f64().unwrap();
    assert!((-56.0..=-46.0).contains(&pct), "moratorium change {pct}");
    let series = json(&dir.path().join("run3_timeseries.json"));
    assert_eq!(series["times"].as_array().unwrap().len(), 201);
}

#[test]
fn series_selection_limits_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = housing_sd(dir.path(), &["simulate", "--scenario", "run2", "--series", "R,H_lh"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("run2_timeseries.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,calendar_month,R,H_lh");
}

#[test]
fn failures_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    for args in [
        &["simulate", "--scenario", "no_such_run"][..],
        &["simulate", "--scenario", "run1", "--series", "bogus"],
        &["--dt", "0.3", "simulate", "--scenario", "run1"],
        &["--dt", "-1", "simulate", "--scenario", "run1"],
        &["sweep", "--delta", "1.5"],
    ] {
        let out = housing_sd(&target, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
        assert!(!target.exists(), "{args:?} left output behind");
    }
}

#[test]
fn bad_parameter_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("bad.toml");
    let text = housing_sd::model::params::DEFAULT_PARAMS_TOML.replacen("[rent]", "[rent]\nmystery = 1.0", 1);
    fs::write(&params, text).unwrap();
    let target = dir.path().join("out");
    let out = housing_sd(
        &target,
        &["--params", params.to_str().unwrap(), "simulate", "--scenario", "run1"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));
    assert!(!target.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert!(housing_sd(dir.path(), &["simulate", "--scenario", "run4"])
            .status
            .success());
    }
    let names = listing(a.path());
    assert_eq!(names, listing(b.path()));
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn manifest_records_inputs_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    assert!(housing_sd(dir.path(), &["simulate", "--scenario", "run2"])
        .status
        .success());
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["created_unix"], 1_600_000_000);
    assert_eq!(manifest["dt"], 0.25);
    assert_eq!(manifest["params_file"], "<builtin>");
    assert_eq!(
        manifest["parameters"].as_object().unwrap().len(),
        housing_sd::model::params::PARAM_DEFS.len()
    );
    for entry in manifest["outputs"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join(entry["file"].as_str().unwrap())).unwrap();
        let digest = format!("{:x}", <sha2::Sha256 as sha2::Digest>::digest(&bytes));
        assert_eq!(entry["sha256"], digest.as_str());
    }
}

#[test]
fn finer_step_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = housing_sd(dir.path(), &["--dt", "0.125", "simulate", "--scenario", "run1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("run1_timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 402);
    assert_eq!(json(&dir.path().join("manifest.json"))["dt"], 0.125);
}

#[test]
fn suite_passes_and_skips_missing_references() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("no_references_here");
    let out_dir = dir.path().join("out");
    let out = housing_sd(&out_dir, &["suite", "--references", refs.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");

    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    for id in [
        "1", "2", "3", "4", "5", "6a", "6b", "6c", "6d", "6e", "6f", "6g", "6h", "6i",
    ] {
        assert!(
            summary.contains(&format!("[PASS] {id} ")),
            "criterion {id} missing:\n{summary}"
        );
    }
    assert_eq!(summary.matches("SKIPPED").count(), 4);

    let json_summary = json(&out_dir.join("summary.json"));
    assert_eq!(json_summary["passed"], true);
    let statuses: Vec<_> = json_summary["validation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["status"].clone())
        .collect();
    assert!(statuses.iter().all(|s| s == "SKIPPED"));
    for name in [
        "headline.json",
        "extreme_conditions.json",
        "comparisons.csv",
        "sweep_run2.csv",
        "run4a_timeseries.csv",
    ] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn validate_compares_supplied_reference() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs");
    fs::create_dir(&refs).unwrap();
    fs::write(
        refs.join("H_lh.csv"),
        "calendar_month,value,units,source\n2020-03,570000,households,AHAR\n2020-06,600000,households,AHAR\n2021-01,650000,households,AHAR\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = housing_sd(
        &out_dir,
        &["--format", "json", "validate", "--references", refs.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let outcomes = json(&out_dir.join("validation.json"));
    let compared: Vec<_> = outcomes
        .as_array()
        .unwrap()
        .iter()
        .filter(|o| o["status"] == "COMPARED")
        .collect();
    assert_eq!(compared.len(), 1);
    let u = compared[0]["theil"]["u"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&u));
}

#[test]
fn sweep_writes_every_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = housing_sd(
        dir.path(),
        &["--format", "json", "sweep", "--scenario", "run1", "--delta", "0.1"],
    );
    assert!(out.status.success());
    let report = json(&dir.path().join("sweep_run1.json"));
    assert_eq!(
        report["parameters"].as_array().unwrap().len(),
        housing_sd::model::params::PARAM_DEFS.len()
    );
}

#[test]
fn compare_writes_one_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = housing_sd(dir.path(), &["compare", "--baseline", "run1", "--variant", "run2"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("compare_run1_vs_run2.csv")).unwrap();
    assert!(csv.starts_with("baseline,variant,metric,"));
    assert!(csv.lines().any(|l| l.starts_with("run1,run2,total_evictions,")));
}

#[test]
fn empty_calibration_copies_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "").unwrap();
    let copy = dir.path().join("copy.toml");
    let out_dir = dir.path().join("out");
    let out = housing_sd(
        &out_dir,
        &[
            "calibrate",
            "--spec",
            spec.to_str().unwrap(),
            "--write-params",
            copy.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let shipped = housing_sd::model::params::DEFAULT_PARAMS_TOML;
    assert_eq!(fs::read_to_string(&copy).unwrap(), shipped);
    assert_eq!(fs::read_to_string(out_dir.join("fitted_params.toml")).unwrap(), shipped);
    let report = json(&out_dir.join("calibration_report.json"));
    assert_eq!(report["final_loss"], 0.0);
}

#[test]
fn calibration_hits_a_single_target() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "budget = 200\n\
         [[free]]\nkey = \"moratorium.filing_reduction\"\nlower = 0.0\nupper = 1.0\n\
         [[target]]\nmetric = \"moratorium_reduction_pct\"\nvalue = 45.0\nscale = 0.1\n",
    )
    .unwrap();
    let out = housing_sd(
        &dir.path().join("out"),
        &["calibrate", "--spec", spec.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("out/calibration_report.json"));
    let achieved = report["targets"][0]["achieved"].as_f64().unwrap();
    assert!((achieved - 45.0).abs() < 0.05, "achieved {achieved}");
}
