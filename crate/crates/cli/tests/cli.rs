use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn traffic_em(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_traffic-em"))
        .current_dir(dir)
        .env_remove("TRAFFIC_EM_WORKERS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = traffic_em(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    // A comparison table may precede the summary.
    let json = &text[text.find("{\n").unwrap()..];
    serde_json::from_str(json).unwrap()
}

const SMALL: &[&str] = &["--set", "synthetic.duration_h=0.5", "--set", "em.num_samples=20"];

fn with(args: &[&'static str]) -> Vec<&'static str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v
}

#[test]
fn help_lists_every_field_with_its_default() {
    let out = traffic_em(Path::new("."), &["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["[em]", "num_samples = 100", "[decay]", "[scheduler]", "interval_s = 1200.0", "TRAFFIC_EM_WORKERS", "Exit codes"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
}

#[test]
fn profiles_set_their_fields() {
    let out = traffic_em(Path::new("."), &["--profile", "sliding-big3", "--print-config"]);
    assert!(out.status.success());
    let cfg: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert_eq!(cfg["em"]["num_iterations"].as_integer(), Some(1));
    assert_eq!(cfg["em"]["time_step_s"].as_float(), Some(240.0));
    assert_eq!(cfg["scheduler"]["interval_s"].as_float(), Some(240.0));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &with(&["simulate"]));
    let first: Vec<Vec<u8>> = ["network.csv", "trajectories.jsonl", "test_pieces.jsonl", "truth.jsonl"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect();
    ok(dir.path(), &with(&["simulate"]));
    for (f, bytes) in ["network.csv", "trajectories.jsonl", "test_pieces.jsonl", "truth.jsonl"].iter().zip(&first) {
        assert_eq!(&std::fs::read(dir.path().join(f)).unwrap(), bytes, "{f} changed");
    }
    let network = String::from_utf8(first[0].clone()).unwrap();
    // Format line, header, one row per link.
    assert_eq!(network.lines().count(), 102);
}

#[test]
fn configuration_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = traffic_em(dir.path(), &["--set", "em.num_samples=0", "simulate"]);
    assert_eq!(bad.status.code(), Some(2));
    let unknown = traffic_em(dir.path(), &["--set", "em.no_such_field=1", "simulate"]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing = traffic_em(dir.path(), &["run-offline"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("network.csv"));
}

#[test]
fn empty_feed_yields_prior_estimates() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &with(&["simulate"]));
    std::fs::write(dir.path().join("trajectories.jsonl"), "").unwrap();
    ok(dir.path(), &with(&["run-offline"]));
    let estimates = std::fs::read_to_string(dir.path().join("estimates.jsonl")).unwrap();
    assert!(estimates.lines().count() > 1);
}

#[test]
fn offline_run_scores_in_four_buckets_and_compares_with_truth() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &with(&["simulate"]));
    ok(dir.path(), &with(&["--profile", "sliding-big3", "run-offline"]));
    let summary = ok(dir.path(), &with(&["evaluate", "--set", "paths.compare_estimates=truth.jsonl"]));
    let buckets = summary["buckets"].as_array().unwrap();
    assert_eq!(buckets.len(), 4);
    assert!(buckets.iter().any(|b| b["count"].as_u64().unwrap() > 0));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["buckets"].as_array().unwrap().len(), 4);
    let table = std::fs::read_to_string(dir.path().join("report_comparison.csv")).unwrap();
    assert!(table.lines().next().unwrap().contains("truth"));
}

#[test]
fn bench_reports_a_rate_within_the_bracket() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &with(&["simulate"]));
    let args = with(&[
        "--profile",
        "streaming",
        "--set",
        "bench.rate_max=50",
        "--set",
        "bench.rounds=3",
        "--set",
        "bench.horizon_intervals=20",
        "bench",
    ]);
    let report = ok(dir.path(), &args);
    let rate = report["max_rate"].as_f64().unwrap();
    assert!((1.0..=50.0).contains(&rate), "{report}");
    assert!(dir.path().join("metrics.jsonl").exists());
}

#[test]
fn overrides_before_and_after_the_command_both_apply() {
    let args = ["--set", "em.num_samples=17", "--print-config", "simulate", "--set", "em.num_iterations=2"];
    let out = traffic_em(Path::new("."), &args);
    assert!(out.status.success());
    let cfg: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert_eq!(cfg["em"]["num_samples"].as_integer(), Some(17));
    assert_eq!(cfg["em"]["num_iterations"].as_integer(), Some(2));
}
