use std::path::{Path, PathBuf};

use freqflow::io::{import_matpower, parse_case, read_case_document, write_case};
use freqflow::orchestrator::{run_stage1, run_timeline, Event, EventScript, Stages};
use freqflow::solver::SolverOptions;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn case_file_round_trip_through_disk() {
    let case = parse_case(fixture("fourbus.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    write_case(&case, &path).unwrap();
    assert_eq!(parse_case(&path).unwrap(), case);
    assert!(!read_case_document(&path).unwrap().per_unit);
}

#[test]
fn warm_and_flat_start_agree() {
    let opts = SolverOptions::default();
    let case = parse_case(fixture("fourbus.json")).unwrap();
    let flat = run_stage1(&case, None, &opts, 1).unwrap();
    let warm = run_stage1(&case, Some(&flat.state), &opts, 1).unwrap();
    assert!(warm.report.iterations <= 1);
    assert!((warm.df - flat.df).abs() < 1e-9);
}

#[test]
fn two_events_give_five_stages() {
    let opts = SolverOptions::default();
    let case = parse_case(fixture("twobus.json")).unwrap();
    let script = EventScript { events: vec![Event::LoadScale { factor: 1.2 }, Event::LoadScale { factor: 1.1 }] };
    let t = run_timeline(&case, &script, Stages::Both, &opts).unwrap();
    assert!(t.failure.is_none());
    let labels: Vec<String> = t.results.iter().map(|r| r.label.to_string()).collect();
    assert_eq!(labels, ["t1-base", "t2-primary", "t3-secondary", "t4-primary", "t5-secondary"]);
    for r in t.results.iter().skip(2).step_by(2) {
        assert!(r.df.abs() < 1e-8, "{} df {}", r.label, r.df);
    }
}

#[test]
fn matpower_case_runs_full_cycle() {
    let opts = SolverOptions::default();
    let dir = tempfile::tempdir().unwrap();
    let sidecar = dir.path().join("sidecar.json");
    std::fs::write(&sidecar, r#"{"generator_defaults": {"droop_gain": 50.0, "kappa": 0.5, "agc": true}}"#).unwrap();
    let case = import_matpower(fixture("case9.m"), Some(sidecar.as_path())).unwrap();
    let gen = case.generators.iter().find(|g| g.bus_id == 2).unwrap().id;
    let script = EventScript { events: vec![Event::GeneratorOutage { id: gen }] };
    let t = run_timeline(&case, &script, Stages::Both, &opts).unwrap();
    assert!(t.failure.is_none(), "{:?}", t.failure);
    assert!(t.results[1].df < 0.0);
    assert!(t.results[2].df.abs() <= t.results[1].df.abs());
}
