use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric-outliers"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = run(&all);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is exactly one JSON object")
}

fn tmp(name: &str, body: &str) -> String {
    let dir = std::env::temp_dir().join(format!("toric-outliers-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn fit_copenhagen_reports_printed_values() {
    let r = json(&["fit", "--table", &data("copenhagen.csv"), "--model", &data("copenhagen-base.json")]);
    assert_eq!(r["schema_version"], 1);
    let fit = &r["base_fit"];
    // cells (1,2,1,1) and (4,1,2,1)
    let (a, b) = (6, 3 * 18 + 3);
    assert!((f(&fit["fitted"][a]) - 16.62).abs() < 0.005);
    assert!((f(&fit["fitted"][b]) - 35.58).abs() < 0.005);
    assert!((f(&fit["residuals"][a]) - 4.263).abs() < 0.001);
    assert!((f(&fit["residuals"][b]) - 3.590).abs() < 0.001);
    assert!((f(&fit["g2"]) - 123.19).abs() < 0.01);
    assert!(r.get("timing").is_none());
}

#[test]
fn fit_eq5_reports_max_adjusted_residual() {
    let r = json(&["fit", "--table", &data("eq5.csv"), "--model", &data("independence-2way.json")]);
    let m = &r["max_residual_test"];
    assert!((f(&m["z"]) - 1.5670).abs() < 5e-4);
    assert_eq!(m["cell"], 0);
    assert_eq!(m["reject"], false);
    assert_eq!(r["poisson_regions"][0]["upper"], 9);
}

#[test]
fn fit_with_outlier_runs_the_asymptotic_test() {
    let r = json(&["fit", "--table", &data("eq5.csv"), "--model", &data("independence-2way-cell11.json")]);
    assert_eq!(r["test"]["df"], 1);
    assert!(r["test"].get("p_monte_carlo").is_none());
    assert_eq!(r["decision"]["alpha"], 0.05);
}

#[test]
fn malformed_table_exits_with_parse_code() {
    let bad = tmp("bad.csv", "dims: 2,2\n1,1,3\n1,2,-4\n");
    let out = run(&["fit", "--table", &bad, "--model", &data("independence-2way.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["fit", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn basis_counts_from_scratch() {
    let two = data("independence-2way.json");
    let r = json(&["basis", "--dims", "3,3", "--model", &two, "--preset", "off"]);
    assert_eq!(r["basis"]["moves"], 9);
    assert_eq!(r["basis"]["source"], "computed");
    let r = json(&["basis", "--table", &data("social.csv"), "--model", &data("social-independence.json")]);
    assert_eq!(r["basis"]["moves"], 9);
}

#[test]
fn basis_round_trips_through_import() {
    let out_path = tmp("moves.txt", "");
    let two = data("independence-2way.json");
    let r = json(&["basis", "--dims", "4,4", "--model", &two, "--out", &out_path]);
    assert_eq!(r["basis"]["moves"], 36);
    let r = json(&["basis", "--dims", "4,4", "--model", &two, "--import", &out_path]);
    assert_eq!(r["basis"]["moves"], 36);
    assert!(r["basis"]["source"].as_str().unwrap().starts_with("imported"));
}

#[test]
fn importing_a_non_move_fails() {
    let bad = tmp("notmove.txt", "1 0 0 0\n");
    let out = run(&["basis", "--dims", "2,2", "--model", &data("independence-2way.json"), "--import", &bad]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn preset_on_without_known_preset_fails() {
    let out = run(&[
        "basis",
        "--table",
        &data("social.csv"),
        "--model",
        &data("social-independence.json"),
        "--preset",
        "on",
    ]);
    assert!(!out.status.success());
}

#[test]
fn test_command_is_replayable_bitwise() {
    let args = [
        "test",
        "--table",
        &data("eq5.csv"),
        "--model",
        &data("independence-2way-cell11.json"),
        "--B",
        "500",
        "--burn-in",
        "100",
        "--seed",
        "7",
        "--chains",
        "2",
        "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r: Value = serde_json::from_slice(&a.stdout).unwrap();
    let cfg = &r["sampler"]["config"];
    assert_eq!(cfg["replicates"], 500);
    assert_eq!(cfg["burn_in"], 100);
    assert_eq!(cfg["thin"], 1);
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["chains"], 2);
    let p = f(&r["test"]["p_monte_carlo"]);
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn trivial_pattern_exits_five() {
    // a whole row is already a margin
    let spec = tmp("row.json", r#"{"terms":[[1],[2]],"outlier_patterns":[[[1,1],[1,2],[1,3],[1,4]]]}"#);
    let out = run(&["test", "--table", &data("eq5.csv"), "--model", &spec, "--B", "10"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn two_pattern_test_rejects() {
    let r = json(&[
        "test",
        "--table",
        &data("social.csv"),
        "--model",
        &data("social-two-patterns.json"),
        "--B",
        "2000",
        "--thin",
        "5",
        "--seed",
        "1",
    ]);
    assert!(f(&r["test"]["p_monte_carlo"]) <= 0.005);
    assert_eq!(r["decision"]["reject_monte_carlo"], true);
}

#[test]
fn trace_file_has_one_row_per_replicate() {
    let trace = tmp("trace.csv", "");
    let out = run(&[
        "test",
        "--table",
        &data("eq5.csv"),
        "--model",
        &data("independence-2way-cell11.json"),
        "--B",
        "50",
        "--trace",
        &trace,
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replicate,statistic,accepted_steps"));
    assert_eq!(lines.count(), 50);
}

#[test]
fn scan_copenhagen_finds_the_two_cells() {
    let r = json(&["scan", "--table", &data("copenhagen.csv"), "--model", &data("copenhagen-base.json")]);
    let cells = r["candidates"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c["direction"] == "type"));
}

#[test]
fn scan_social_per_cell_monte_carlo_is_zero() {
    let r = json(&[
        "scan",
        "--table",
        &data("social.csv"),
        "--model",
        &data("social-independence.json"),
        "--test-cells",
        "--mc",
        "--B",
        "1000",
        "--thin",
        "5",
    ]);
    let tests = r["cell_tests"].as_array().unwrap();
    assert_eq!(tests.len(), 5);
    for t in tests {
        assert_eq!(f(&t["test"]["p_monte_carlo"]), 0.0, "{t}");
    }
}

#[test]
fn scan_uniform_table_is_empty() {
    let t = tmp("uniform.csv", "dims: 2,3\n1,1,5\n1,2,5\n1,3,5\n2,1,5\n2,2,5\n2,3,5\n");
    let r = json(&["scan", "--table", &t, "--model", &data("independence-2way.json")]);
    assert!(r["candidates"]["cells"].as_array().unwrap().is_empty());
}

#[test]
fn timing_only_when_asked() {
    let r = json(&["fit", "--table", &data("eq5.csv"), "--model", &data("independence-2way.json"), "--timing"]);
    assert!(f(&r["timing"]["total_seconds"]) >= 0.0);
}
