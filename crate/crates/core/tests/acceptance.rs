//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! Run with `cargo test --test acceptance`. Criterion A7 needs external data:
//! set `FREQFLOW_SAVNW_DIR` to a directory holding `savnw.json` (native case
//! with the generator and load frequency parameters filled in).

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freqflow::freq::build_droop_model;
use freqflow::io::parse_case;
use freqflow::network::{to_per_unit, Generator, NetworkCase, Status};
use freqflow::orchestrator::{
    apply_event, rebalance_slack, run_stage1, run_stage2, run_timeline, Event, EventScript, StageResult, Stages,
};
use freqflow::solver::{assemble_residuals, power_balance, FrequencyClosure, SolverModel, SolverOptions};
use freqflow::synth::{synthetic_case, SynthParams};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

fn generator(id: u32, p_set: f64, p_min: f64, p_max: f64, gain: f64) -> Generator {
    Generator { id, bus_id: 1, p_set, p_min, p_max, droop_gain: gain, kappa: 0.0, agc: false, status: Status::InService }
}

/// Smooth droop model: C1 at every breakpoint, bounded and monotone, exact
/// spot values.
fn a1() -> Verdict {
    let start = Instant::now();
    let width = 0.02;
    let base = 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_c1: f64 = 0.0;
    let mut bound_violations = 0;
    let mut monotone_violations = 0;
    for i in 0..1000 {
        let p_max: f64 = rng.random_range(50.0..1500.0);
        let p_min = p_max * rng.random_range(0.0..0.4);
        let p_set = rng.random_range(p_min..p_max);
        let r_droop: f64 = rng.random_range(0.03..0.08);
        let gain = p_max / (r_droop * 60.0);
        let g = generator(i, p_set / base, p_min / base, p_max / base, gain / base);
        let m = match build_droop_model(&g, width) {
            Ok(m) => m,
            Err(e) => return Fail(format!("generator {i}: {e}")),
        };

        // second-order one-sided differences are exact on each polynomial
        // piece, so any left/right disagreement is a derivative jump
        let h = width / 8.0;
        for x in m.breakpoints {
            let left = (3.0 * m.eval(x) - 4.0 * m.eval(x - h) + m.eval(x - 2.0 * h)) / (2.0 * h);
            let right = (-3.0 * m.eval(x) + 4.0 * m.eval(x + h) - m.eval(x + 2.0 * h)) / (2.0 * h);
            let d = m.derivative(x);
            worst_c1 = worst_c1.max((left - right).abs()).max((left - d).abs()).max((right - d).abs());
        }

        let mut prev = f64::INFINITY;
        for k in 0..=20_000 {
            let df = -5.0 + 10.0 * k as f64 / 20_000.0;
            let v = m.eval(df);
            if v < m.dp_min || v > m.dp_max {
                bound_violations += 1;
            }
            if v > prev {
                monotone_violations += 1;
            }
            prev = v;
        }
    }

    let g101 = build_droop_model(&generator(101, 770.0, 0.0, 890.0, 950.0), width).unwrap();
    let spots = [
        (g101.eval(0.0), 0.0),
        (g101.eval(-0.05), 47.5),
        (g101.eval(g101.kink_max()), 117.625),
        (g101.eval(-0.2), 120.0),
    ];
    let worst_spot = spots.iter().map(|&(got, want)| rel(got, want)).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_c1 < 1e-6 && bound_violations == 0 && monotone_violations == 0 && worst_spot < 1e-10 && secs < 5.0,
        format!(
            "1000 generators, C1 mismatch {worst_c1:.2e} pu/Hz, bound/monotone violations {bound_violations}/{monotone_violations}, \
             spot rel err {worst_spot:.1e}, {secs:.2} s"
        ),
    )
}

fn two_bus() -> NetworkCase {
    parse_case(fixture("twobus.json")).unwrap()
}

/// Stage-1 two-bus oracle.
fn a2() -> Verdict {
    let r = run_stage1(&two_bus(), None, &SolverOptions::default(), 1).unwrap();
    let err = (r.df + 0.5).abs();
    verdict(
        err <= 1e-8 && r.report.iterations <= 15,
        format!("df = {:.12} Hz (err {err:.1e}), {} iterations", r.df, r.report.iterations),
    )
}

/// Stage-2 two-bus oracle.
fn a3() -> Verdict {
    let opts = SolverOptions::default();
    let case = two_bus();
    let s1 = run_stage1(&case, None, &opts, 1).unwrap();
    let s2 = run_stage2(&case, &s1, &opts).unwrap();
    let ace_mw = s1.total_ace() * case.mva_base;
    let total_mw = s2.dispatch[0].p_total * case.mva_base;
    let ok = (ace_mw - 50.0).abs() <= 1e-6 && s2.df.abs() <= 1e-6 && (total_mw - 150.0).abs() <= 1e-6;
    verdict(ok, format!("ACE(t2) = {ace_mw:.9} MW, df(t3) = {:.1e} Hz, P(t3) = {total_mw:.9} MW", s2.df))
}

/// Hard-clamp outer loop: clamps every generator whose output in the last
/// solve exceeded its limit, fixes it at the limit, and re-solves with pure
/// linear droop for the rest. Returns the sequence of clamp sets and whether
/// a set reappeared after a different one (a cycle).
fn outer_loop(case: &NetworkCase, opts: &SolverOptions, max_outer: usize) -> (Vec<BTreeSet<u32>>, bool) {
    let mut clamped = BTreeSet::new();
    let mut history: Vec<BTreeSet<u32>> = Vec::new();
    for _ in 0..max_outer {
        let mut c = case.clone();
        for g in &mut c.generators {
            if clamped.contains(&g.id) {
                g.p_set = g.p_max;
                g.droop_gain = 0.0;
            } else {
                g.p_max = 1e3;
                g.p_min = -1e3;
            }
        }
        let r = run_stage1(&c, None, opts, 1).expect("outer-loop solve");
        let next: BTreeSet<u32> = case
            .generators
            .iter()
            .filter(|g| r.dispatch_of(g.id).is_some_and(|d| d.p_total > g.p_max + 1e-9))
            .map(|g| g.id)
            .collect();
        history.push(clamped.clone());
        if next == clamped {
            return (history, false);
        }
        if history[..history.len() - 1].contains(&next) {
            history.push(next);
            return (history, true);
        }
        clamped = next;
    }
    (history, false)
}

/// Implicit limits versus a hard-clamp outer loop on the saturating case.
fn a4() -> Verdict {
    let opts = SolverOptions::default();
    let case = parse_case(fixture("fourbus.json")).unwrap();
    let implicit = run_stage1(&case, None, &opts, 1).unwrap();
    let saturated: Vec<u32> = implicit
        .dispatch
        .iter()
        .filter(|d| {
            let g = case.generator(d.id).unwrap();
            d.p_total > g.p_max - 0.05 * (g.p_max - g.p_set)
        })
        .map(|d| d.id)
        .collect();
    let (history, cycled) = outer_loop(&case, &opts, 50);
    let ok = implicit.report.converged && implicit.report.iterations <= 40 && cycled && history.len() <= 51;
    verdict(
        ok,
        format!(
            "implicit: {} iterations, df = {:.4} Hz, near-limit generators {saturated:?}; outer loop clamp sets {:?} ({})",
            implicit.report.iterations,
            implicit.df,
            history,
            if cycled { "cycle" } else { "no cycle" }
        ),
    )
}

/// Residual checks at a solved stage.
fn consistency(case: &NetworkCase, r: &StageResult, closure: FrequencyClosure, opts: &SolverOptions) -> (f64, f64) {
    let model = SolverModel::build(case, opts.smoothing_hz).unwrap();
    let sec: Vec<f64> = model
        .gens
        .iter()
        .map(|g| r.dispatch_of(g.id).map_or(0.0, |d| d.dp_secondary))
        .collect();
    let balance = power_balance(&model, &r.state, &sec, closure).mismatch().abs();
    let f = assemble_residuals(&model, &r.state, &sec, closure).unwrap();
    (balance, f[model.layout.df()].abs())
}

/// Frequency recovery over random single outages on synthetic grids.
fn a5() -> Verdict {
    let opts = SolverOptions::default();
    let limit = 10.0 * opts.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut converged, mut violations) = (0, Vec::new());
    let mut worst_check: f64 = 0.0;
    for s in 0..50u64 {
        let n = rng.random_range(50..=200);
        let case = to_per_unit(&synthetic_case(&SynthParams::new(n, 500 + s), &opts).unwrap()).unwrap();
        let slack = case.slack_bus().unwrap().id;
        let candidates: Vec<u32> = case.generators.iter().filter(|g| g.bus_id != slack).map(|g| g.id).collect();
        let outage = candidates[rng.random_range(0..candidates.len())];
        let event = Event::GeneratorOutage { id: outage };
        let script = EventScript { events: vec![event.clone()] };
        let t = run_timeline(&case, &script, Stages::Both, &opts).unwrap();
        if t.failure.is_some() || t.results.len() != 3 {
            continue;
        }
        converged += 1;
        let (base, s1, s2) = (&t.results[0], &t.results[1], &t.results[2]);
        let tripped = apply_event(&rebalance_slack(&case, base).0, &event).unwrap();
        for (c, r, closure) in [
            (&case, base, FrequencyClosure::Pinned),
            (&tripped, s1, FrequencyClosure::Coupled),
            (&tripped, s2, FrequencyClosure::Coupled),
        ] {
            let (bal, eq) = consistency(c, r, closure, &opts);
            worst_check = worst_check.max(bal).max(eq);
        }
        let recovers = s2.df.abs() <= s1.df.abs() && s2.total_ace().abs() <= s1.total_ace().abs();
        if !recovers {
            violations.push(format!("scenario {s} (n = {n}, gen {outage})"));
        }
    }
    verdict(
        converged > 0 && violations.is_empty() && worst_check <= limit,
        format!(
            "{converged}/50 converged, recovery violations {violations:?}, worst balance/slack residual {worst_check:.1e} pu"
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Wall time on synthetic grids up to 10k buses.
fn a6() -> Verdict {
    let opts = SolverOptions::default();
    let sizes = [1000usize, 2000, 5000, 10_000];
    let mut per_iter = Vec::new();
    let mut total_10k = f64::INFINITY;
    let mut all_converged = true;
    for &n in &sizes {
        let mut samples = Vec::new();
        for _ in 0..3 {
            let r = freqflow::cli::bench(n, 1, &opts).unwrap();
            all_converged &= r.converged;
            samples.push(r.seconds_per_iteration);
            if n == 10_000 {
                total_10k = total_10k.min(r.total_seconds);
            }
        }
        per_iter.push(median(samples));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = per_iter.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let times: Vec<String> = sizes.iter().zip(&per_iter).map(|(n, t)| format!("{n}: {:.1} ms", t * 1e3)).collect();
    verdict(
        all_converged && total_10k < 60.0 && slope <= 1.5,
        format!("10k buses both stages {total_10k:.2} s; per-iteration [{}]; log-log slope {slope:.2}", times.join(", ")),
    )
}

/// Published savnw figures, when the data is supplied.
fn a7() -> Verdict {
    let Some(dir) = std::env::var_os("FREQFLOW_SAVNW_DIR").map(PathBuf::from) else {
        return Skip("FREQFLOW_SAVNW_DIR not set".into());
    };
    let path = dir.join("savnw.json");
    if !path.exists() {
        return Skip(format!("{} not found", path.display()));
    }
    let case = match parse_case(&path) {
        Ok(c) => c,
        Err(e) => return Fail(format!("cannot load {}: {e}", path.display())),
    };
    let opts = SolverOptions::default();
    let mut events: Vec<Event> = case
        .generators
        .iter()
        .filter(|g| g.bus_id == 211)
        .map(|g| Event::GeneratorOutage { id: g.id })
        .collect();
    if events.len() != 1 {
        return Fail(format!("expected one generator at bus 211, found {}", events.len()));
    }
    events.push(Event::LoadScale { factor: 1.05 });
    let t = run_timeline(&case, &EventScript { events }, Stages::Both, &opts).unwrap();
    if t.failure.is_some() || t.results.len() != 5 {
        return Fail(format!("timeline stopped early: {:?}", t.failure));
    }
    let df_ref = [-0.12, -0.009, -0.087, -0.006];
    let ace_ref = [12.7, 0.93, 9.13, 0.65];
    let mut errs = Vec::new();
    for (k, r) in t.results[1..].iter().enumerate() {
        let ace = r.total_ace() * case.mva_base;
        if (r.df - df_ref[k]).abs() > 0.01 || (ace - ace_ref[k]).abs() > 1.5 {
            errs.push(format!("{}: df {:.4} Hz, ACE {ace:.2} MW", r.label, r.df));
        }
    }
    // generator output by bus at t2 and t3
    let p_ref = [(101, 885.0, 870.0), (102, 886.0, 870.0), (206, 900.0, 930.0), (3011, 421.0, 472.0), (3018, 118.0, 110.0)];
    for (bus, p2, p3) in p_ref {
        for (r, want) in [(&t.results[1], p2), (&t.results[2], p3)] {
            let got: f64 = r.dispatch.iter().filter(|d| d.bus_id == bus).map(|d| d.p_total).sum::<f64>() * case.mva_base;
            if (got - want).abs() > 10.0 {
                errs.push(format!("{}: bus {bus} P {got:.1} MW vs {want}", r.label));
            }
        }
    }
    verdict(errs.is_empty(), if errs.is_empty() { "table values reproduced".into() } else { errs.join("; ") })
}

fn main() {
    let criteria: [(&str, &str, fn() -> Verdict); 7] = [
        ("A1", "smooth droop model", a1),
        ("A2", "stage-1 two-bus oracle", a2),
        ("A3", "stage-2 two-bus oracle", a3),
        ("A4", "implicit limits vs outer loop", a4),
        ("A5", "frequency recovery on random outages", a5),
        ("A6", "scalability", a6),
        ("A7", "savnw reference tables", a7),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{id} {tag} {name}: {detail} [{secs:.2} s]");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
