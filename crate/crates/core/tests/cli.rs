use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn freqflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqflow")).args(args).output().expect("run freqflow")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn strip_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn solve_two_bus_both_stages() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let csv = dir.path().join("gens.csv");
    let case = fixture("twobus.json");
    let o = freqflow(&[
        "solve",
        "--case",
        case.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let v = read_json(&out);
    let stages = v["stages"].as_array().unwrap();
    let df: Vec<f64> = stages.iter().map(|s| s["df_hz"].as_f64().unwrap()).collect();
    assert!((df[df.len() - 2] + 0.5).abs() < 1e-8, "{df:?}");
    assert!(df[df.len() - 1].abs() < 1e-8, "{df:?}");
    assert!(stages.iter().all(|s| s["converged"].as_bool() == Some(true)));

    let table = fs::read_to_string(&csv).unwrap();
    let header = table.lines().next().unwrap();
    assert_eq!(header, "stage,id,p_set_mw,dp_primary_mw,dp_secondary_mw,p_total_mw,q_mvar,df_hz");
    assert_eq!(table.lines().count(), 1 + stages.len());
}

#[test]
fn solve_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let case = fixture("case9.m");
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let o = freqflow(&["solve", "--case", case.to_str().unwrap(), "--stage", "base", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(strip_timestamp(&fs::read_to_string(&out).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn solve_with_event_script() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.json");
    fs::write(&events, r#"{"events": [{"type": "load_scale", "factor": 1.5}]}"#).unwrap();
    let out = dir.path().join("out.json");
    let case = fixture("twobus.json");
    let o = freqflow(&[
        "solve",
        "--case",
        case.to_str().unwrap(),
        "--events",
        events.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    let labels: Vec<&str> = v["stages"].as_array().unwrap().iter().map(|s| s["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["t1-base", "t2-primary", "t3-secondary"]);
    let df = v["stages"][1]["df_hz"].as_f64().unwrap();
    assert!((df + 0.75).abs() < 1e-8, "{df}");
}

#[test]
fn validate_reports_dangling_reference() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("twobus.json")).unwrap().replacen("\"bus_id\": 2", "\"bus_id\": 9", 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text).unwrap();
    let o = freqflow(&["validate", "--case", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains('9'));

    let good = fixture("fourbus.json");
    let o = freqflow(&["validate", "--case", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn malformed_case_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"version\": 1,").unwrap();
    let out = dir.path().join("out.json");
    let o = freqflow(&["solve", "--case", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn iteration_limit_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let case = fixture("fourbus.json");
    let o = freqflow(&["solve", "--case", case.to_str().unwrap(), "--max-iter", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v = read_json(&out);
    assert!(v["error"].is_string());
}

#[test]
fn sweep_writes_one_file_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let case = fixture("twobus.json");
    let o = freqflow(&[
        "sweep",
        "--case",
        case.to_str().unwrap(),
        "--param",
        "load-scale",
        "--values",
        "1.0,1.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("load-scale_1.json").exists());
    assert!(dir.path().join("load-scale_1.5.json").exists());
    let summary = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn bench_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let o = freqflow(&["bench", "--buses", "1000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["converged"].as_bool(), Some(true));
    assert!(v["df_primary_hz"].as_f64().unwrap() < 0.0);
}
