mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::data_dir;
use msinv::cli::{DiagnosisSummary, DEFAULT_SIM_CONFIG};
use msinv::report::{read_table_csv, InventoryReport};

fn msinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msinv"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("MSINV_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = msinv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    msinv(args).status.code().expect("exit code")
}

fn subset_dir() -> PathBuf {
    data_dir().join("bc_subset")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn load_report(dir: &Path) -> InventoryReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Every file under `dir`, relative path to bytes.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn mc_report_columns_add_up_and_csv_matches_json() {
    let tmp = tempfile::tempdir().unwrap();
    let data = subset_dir();
    ok(&[
        "estimate", "--data", s(&data), "--estimator", "ipw", "--stage2", "year:365", "--measurement", "mc",
        "--mc-iters", "200", "--seed", "1", "--out", s(tmp.path()),
    ]);
    let report = load_report(tmp.path());
    assert_eq!(report.iterations, Some(200));
    for r in &report.rows {
        let sum = r.v_stage1 + r.v_stage2 + r.v_stage3 + r.v_measurement;
        assert!((r.v_total - sum).abs() <= 1e-12 * r.v_total.max(1.0), "{}", r.stratum);
        assert!(r.v_measurement >= 0.0);
    }
    let table = read_table_csv(&tmp.path().join("table.csv")).unwrap();
    assert_eq!(table.len(), report.rows.len());
    for (csv, json) in table.iter().zip(&report.rows) {
        assert_eq!(csv.stratum, json.stratum);
        let round = |x: f64| format!("{x:.2}").parse::<f64>().unwrap();
        assert_eq!(csv.total, round(json.total));
        assert_eq!(csv.v_total, round(json.v_total));
        assert_eq!(csv.ci_lower, round(json.ci_lower));
        assert_eq!(csv.ci_upper, round(json.ci_upper));
    }
    let decomposition = std::fs::read_to_string(tmp.path().join("decomposition.csv")).unwrap();
    assert!(decomposition.starts_with("# manifest: "));
    assert_eq!(decomposition.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4 * report.rows.len());
}

#[test]
fn observed_horizon_has_no_stage_two_column() {
    let tmp = tempfile::tempdir().unwrap();
    let data = subset_dir();
    ok(&[
        "estimate", "--data", s(&data), "--stage2", "observed", "--measurement", "bias-correct", "--out",
        s(tmp.path()),
    ]);
    let report = load_report(tmp.path());
    assert!(report.rows.iter().all(|r| r.v_stage2 == 0.0));
    assert!(report.population().v_stage1 > 0.0);
}

#[test]
fn all_variants_writes_eight_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = subset_dir();
    ok(&["estimate", "--data", s(&data), "--all-variants", "--mc-iters", "50", "--out", s(tmp.path())]);
    let mut dirs: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    dirs.sort();
    assert_eq!(
        dirs,
        [
            "hajek_observed_bias-correct",
            "hajek_observed_mc",
            "hajek_year365_bias-correct",
            "hajek_year365_mc",
            "ipw_observed_bias-correct",
            "ipw_observed_mc",
            "ipw_year365_bias-correct",
            "ipw_year365_mc",
        ]
    );
    for d in &dirs {
        let r = load_report(&tmp.path().join(d));
        assert_eq!(&r.variant_label(), d);
    }
}

#[test]
fn replay_reproduces_outputs_bit_for_bit() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let data = subset_dir();
    ok(&[
        "estimate", "--data", s(&data), "--estimator", "hajek", "--measurement", "mc", "--mc-iters", "100",
        "--seed", "9", "--trace", "--out", s(&first),
    ]);
    // differing clock so the timestamp must come from the manifest
    let replayed = tmp.path().join("replayed");
    let out = Command::new(env!("CARGO_BIN_EXE_msinv"))
        .args(["replay", s(&first.join("report.json")), "--out", s(&replayed)])
        .env("SOURCE_DATE_EPOCH", "42")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(snapshot(&first), snapshot(&replayed));

    let from_csv = tmp.path().join("from_csv");
    ok(&["replay", s(&first.join("table.csv")), "--out", s(&from_csv)]);
    assert_eq!(snapshot(&first), snapshot(&from_csv));
}

#[test]
fn replay_refuses_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for f in ["passes.csv", "frame.csv", "strata.csv"] {
        std::fs::copy(subset_dir().join(f), data.join(f)).unwrap();
    }
    let run = tmp.path().join("run");
    ok(&["estimate", "--data", s(&data), "--measurement", "bias-correct", "--out", s(&run)]);
    let strata = data.join("strata.csv");
    let text = std::fs::read_to_string(&strata).unwrap();
    std::fs::write(&strata, text.replace("MS,51,91", "MS,51,92")).unwrap();
    let artifact = run.join("report.json");
    assert_eq!(code(&["replay", s(&artifact), "--out", s(&tmp.path().join("again"))]), 2);
    ok(&["replay", s(&artifact), "--no-verify", "--out", s(&tmp.path().join("forced"))]);
}

#[test]
fn simulate_is_deterministic_and_shaped() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&["simulate", "--reps", "10", "--seed", "7", "--out", s(dir)]);
    }
    let csv_a = std::fs::read(a.join("simulation.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("simulation.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("simulation.json")).unwrap(),
        std::fs::read(b.join("simulation.json")).unwrap()
    );

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(a.join("simulation.csv"))
        .unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["stratum", "variant", "bias_pct", "var", "mse", "coverage"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4 * 5);
    for r in &rows {
        let coverage: f64 = r[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&coverage));
    }
}

#[test]
fn simulate_without_emitters_has_zero_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("zero.toml");
    std::fs::write(&config, DEFAULT_SIM_CONFIG.replace("emit_prob = 0.055", "emit_prob = 0.0")).unwrap();
    ok(&["simulate", "--config", s(&config), "--reps", "5", "--out", s(tmp.path())]);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(tmp.path().join("simulation.csv"))
        .unwrap();
    for r in rdr.records() {
        let r = r.unwrap();
        assert_eq!(&r[2], "0", "{r:?}");
        assert_eq!(&r[3], "0");
    }
}

#[test]
fn plan_with_census_sampling_has_no_stage_one_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut scenario: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("plan_scenario.json")).unwrap()).unwrap();
    for s in scenario["strata"].as_array_mut().unwrap() {
        s["n_sampled"] = s["n_population"].clone();
    }
    let path = tmp.path().join("census.json");
    std::fs::write(&path, scenario.to_string()).unwrap();
    let out = tmp.path().join("plan.csv");
    ok(&["plan", "--scenario", s(&path), "--estimator", "hajek", "--out", s(&out)]);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
        assert!(r[2].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn diagnose_subset_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = subset_dir();
    ok(&["diagnose", "--data", s(&data), "--out", s(tmp.path())]);
    let summary: DiagnosisSummary =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("diagnostics.json")).unwrap()).unwrap();
    // regression locks on the packaged subset
    assert_eq!(summary.components, 198);
    assert_eq!(summary.passes, 849);
    assert_eq!(summary.median_passes_per_day, 2.0);
    assert_eq!(summary.single_day_components, 17);
    assert_eq!(summary.zero_emitting_strata, ["Recovery Scheme"]);
    let quartiles = summary.gamma_quartiles.unwrap();
    assert!(quartiles.iter().all(|q| (1.0 - q).abs() < 1e-9), "{quartiles:?}");
    let gamma = std::fs::read_to_string(tmp.path().join("gamma.csv")).unwrap();
    assert!(gamma.lines().count() > 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = subset_dir();
    let out = tmp.path().join("o");
    let base = |extra: &[&str]| -> i32 {
        let mut args = vec!["estimate", "--data", s(&data), "--measurement", "bias-correct", "--out", s(&out)];
        args.extend_from_slice(extra);
        code(&args)
    };
    assert_eq!(base(&[]), 0);
    assert_eq!(base(&["--estimator", "median"]), 4);
    assert_eq!(base(&["--stage2", "month"]), 4);
    assert_eq!(base(&["--ci-level", "1.5"]), 4);
    // two survey days cannot fit in a one-day horizon
    assert_eq!(base(&["--stage2", "year:1"]), 3);
    assert_eq!(code(&["estimate", "--data", s(&tmp.path().join("missing")), "--out", s(&out)]), 2);
    assert_eq!(code(&["frobnicate"]), 4);
    assert_eq!(code(&["--help"]), 0);

    let broken = tmp.path().join("broken");
    std::fs::create_dir(&broken).unwrap();
    for f in ["passes.csv", "frame.csv", "strata.csv"] {
        std::fs::copy(subset_dir().join(f), broken.join(f)).unwrap();
    }
    std::fs::write(broken.join("strata.csv"), "stratum,n_sampled\nMS,51\n").unwrap();
    assert_eq!(code(&["estimate", "--data", s(&broken), "--out", s(&out)]), 2);

    let threads = Command::new(env!("CARGO_BIN_EXE_msinv"))
        .args(["estimate", "--data", s(&data), "--mc-iters", "20", "--out", s(&out)])
        .env("MSINV_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(4));
}
