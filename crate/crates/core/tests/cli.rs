use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gad(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gad"))
        .args(args)
        .current_dir(dir)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn events(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = gad(&["synth", "--period", "40", "--n", "4000", "--seed", "7", "--noise", "0.1", "--out", name], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 4000);
}

#[test]
fn run_on_a_period_40_trace() {
    let dir = tempfile::tempdir().unwrap();
    // Phase 21 puts the first minimum at stream index 10.
    let out = gad(&["synth", "--period", "40", "--n", "1200", "--phase", "21", "--out", "walk.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = gad(&["run", "--input", "walk.csv", "--out", "events.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ev = events(&dir.path().join("events.jsonl"));
    let kinds: Vec<&str> = ev.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(&kinds[..3], ["segment_captured", "model_ready", "verification_passed"]);
    assert_eq!(ev[0]["stream_index"], 330);
    assert_eq!(ev[0]["detail"]["L"], 40);
    assert_eq!(ev[0]["detail"]["T_start"], 10);
    assert_eq!(ev[1]["stream_index"], 330);
    assert_eq!(ev[2]["stream_index"], 410);
    let indices: Vec<u64> = ev.iter().map(|e| e["stream_index"].as_u64().unwrap()).collect();
    assert!(indices.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn spliced_trace_raises_an_anomaly_after_the_splice() {
    let dir = tempfile::tempdir().unwrap();
    let first = gad(&["synth", "--period", "40", "--n", "1100", "--noise", "0.1", "--seed", "1", "--out", "x.csv"], dir.path());
    let second = gad(
        &["synth", "--period", "60", "--amplitude", "2.5", "--baseline", "9.7", "--noise", "0.125", "--seed", "2", "--n", "800", "--waveform", "two-harmonic", "--out", "y.csv"],
        dir.path(),
    );
    assert!(first.status.success() && second.status.success());
    let mut joined = std::fs::read(dir.path().join("x.csv")).unwrap();
    joined.extend(std::fs::read(dir.path().join("y.csv")).unwrap());
    std::fs::write(dir.path().join("xy.csv"), joined).unwrap();
    let out = gad(&["run", "--input", "xy.csv", "--out", "events.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let after = events(&dir.path().join("events.jsonl"))
        .iter()
        .filter(|e| e["kind"] == "anomaly" && e["stream_index"].as_u64().unwrap() > 1100)
        .count();
    assert!(after >= 1, "no anomaly after the splice");
}

#[test]
fn missing_input_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = gad(&["run", "--input", "nope.csv", "--out", "events.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("events.jsonl").exists());
}

#[test]
fn short_trace_ends_before_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    gad(&["synth", "--period", "40", "--n", "400", "--out", "short.csv"], dir.path());
    let out = gad(&["run", "--input", "short.csv", "--out", "events.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_row_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "0.1,9.7,0.3\na,b,c\n").unwrap();
    let out = gad(&["run", "--input", "bad.csv", "--out", "events.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gad(&["run"], dir.path()).status.code(), Some(2));
    assert_eq!(gad(&["run", "--input", "a", "--out", "b", "--mode", "other"], dir.path()).status.code(), Some(2));
    assert_eq!(gad(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(gad(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn eval_needs_two_subjects() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("one")).unwrap();
    gad(&["synth", "--period", "40", "--n", "1400", "--out", "one/S001.csv"], dir.path());
    let out = gad(&["eval", "--cohort-dir", "one", "--out", "report"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn environment_overrides_flags_defaults() {
    let dir = tempfile::tempdir().unwrap();
    gad(&["synth", "--period", "40", "--n", "1200", "--phase", "21", "--out", "walk.csv"], dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_gad"))
        .arg("run")
        .current_dir(dir.path())
        .env_clear()
        .env("GAD_INPUT", "walk.csv")
        .env("GAD_OUT", "events.jsonl")
        .env("GAD_MODE", "uniform")
        .env("GAD_UNIFORM_L", "40")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ev = events(&dir.path().join("events.jsonl"));
    assert_eq!(ev[0]["detail"]["L"], 40);
    assert_eq!(ev[0]["detail"]["T_end"], 50);
}

#[test]
fn cohort_then_eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = gad(&["cohort", "--cohort-dir", "cohort", "--subjects", "10"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = gad(&["eval", "--cohort-dir", "cohort", "--out", "report"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report");
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    let n = summary["verification"]["passed"].as_u64().unwrap() as usize;
    let pairs = std::fs::read_to_string(report.join("pairs.csv")).unwrap();
    assert_eq!(pairs.lines().count() - 1, n * n - n);
    assert_eq!(std::fs::read_to_string(report.join("pairs.jsonl")).unwrap().lines().count(), n * n - n);
    assert_eq!(std::fs::read_to_string(report.join("verification.csv")).unwrap().lines().count(), 11);
    assert_eq!(std::fs::read_to_string(report.join("controls.csv")).unwrap().lines().count() - 1, n);
    assert!(report.join("latency_histogram.csv").exists());
}
