//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a solve did not converge (results are still
//! written), 2 bad input or arguments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    import_matpower, parse_case, parse_events, read_case_document, to_precise_json, write_generator_csv_file,
    ResultsFile,
};
use crate::network::{to_per_unit, validate, NetworkCase};
use crate::orchestrator::{
    run_base, run_cycle, run_timeline, Event, StageResult, Stages, Timeline,
};
use crate::solver::SolverOptions;
use crate::synth::{largest_non_slack_generator, synthetic_case, SynthParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "freqflow", version, about = "Frequency-aware AC power flow with primary and secondary control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Base,
    Primary,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    SmoothingHz,
    LoadScale,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step_cap: f64,
    #[arg(long, default_value_t = 0.2)]
    pub df_step_cap: f64,
    #[arg(long, default_value_t = crate::freq::DEFAULT_SMOOTHING_HZ)]
    pub smoothing_hz: f64,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            step_cap: self.step_cap,
            df_step_cap: self.df_step_cap,
            smoothing_hz: self.smoothing_hz,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct CaseArgs {
    /// Case file: native JSON, or MATPOWER `.m`.
    #[arg(long)]
    pub case: PathBuf,
    /// Frequency-parameter sidecar for MATPOWER cases.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a case, optionally through a sequence of events.
    Solve {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        stage: StageArg,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generator table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a case and print the validation report.
    Validate {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Solve both stages once per parameter value.
    Sweep {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time both stages on a synthetic grid after its largest non-slack
    /// generator trips.
    Bench {
        #[arg(long)]
        buses: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn is_matpower(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "m")
}

fn load_case(args: &CaseArgs) -> Result<NetworkCase> {
    if is_matpower(&args.case) {
        import_matpower(&args.case, args.sidecar.as_deref())
    } else {
        parse_case(&args.case)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Splits a stage error into what to report and what was computed.
fn collect(res: Result<Vec<StageResult>>) -> Result<(Vec<StageResult>, Option<String>)> {
    match res {
        Ok(v) => Ok((v, None)),
        Err(Error::NotConverged { label, result }) => {
            let msg = format!("{label} did not converge");
            Ok((vec![*result], Some(msg)))
        }
        Err(e) => Err(e),
    }
}

fn run_solve(
    case_args: &CaseArgs,
    events: Option<&Path>,
    stage: StageArg,
    opts: &SolverOptions,
    out: &Path,
    csv: Option<&Path>,
) -> Result<i32> {
    let case = load_case(case_args)?;
    let stages = match stage {
        StageArg::Base => Stages::BaseOnly,
        StageArg::Primary => Stages::PrimaryOnly,
        StageArg::Both => Stages::Both,
    };
    let (results, warnings, error) = match events {
        Some(path) => {
            let script = parse_events(path)?;
            let Timeline { results, failure, warnings } = run_timeline(&case, &script, stages, opts)?;
            match failure {
                Some(Error::NotConverged { label, .. }) => (results, warnings, Some(format!("{label} did not converge"))),
                Some(e) => return Err(e),
                None => (results, warnings, None),
            }
        }
        None => {
            let (results, error) = match stages {
                Stages::BaseOnly => collect(run_base(&case, None, opts).map(|r| vec![r]))?,
                _ => collect(run_cycle(&case, None, stages, opts, 1))?,
            };
            (results, Vec::new(), error)
        }
    };
    let file = ResultsFile::new(&results, warnings, error);
    write_text(out, &to_precise_json(&file)?)?;
    if let Some(csv) = csv {
        write_generator_csv_file(&file, csv)?;
    }
    for s in &file.stages {
        println!(
            "{}: converged={} iterations={} df={:.9} Hz",
            s.label, s.converged, s.iterations, s.df_hz
        );
        for w in &s.warnings {
            eprintln!("warning: {}: {w}", s.label);
        }
    }
    for w in &file.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(e) = &file.error {
        eprintln!("error: {e}");
    }
    Ok(if file.all_converged() && file.error.is_none() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_validate(args: &CaseArgs) -> Result<i32> {
    let case = if is_matpower(&args.case) {
        import_matpower(&args.case, args.sidecar.as_deref())
    } else {
        read_case_document(&args.case)
    };
    let case = match case {
        Ok(c) => c,
        Err(Error::Invalid(report)) => {
            println!("{report}");
            return Ok(EXIT_INPUT);
        }
        Err(e) => return Err(e),
    };
    let report = validate(&case);
    if report.is_empty() {
        println!(
            "ok: {} buses, {} branches, {} generators, {} loads, {} areas",
            case.buses.len(),
            case.branches.len(),
            case.generators.len(),
            case.loads.len(),
            case.areas.len()
        );
        Ok(EXIT_OK)
    } else {
        println!("{report}");
        Ok(EXIT_INPUT)
    }
}

fn format_value(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

fn run_sweep(case_args: &CaseArgs, param: SweepParam, values: &[f64], solver: &SolverArgs, out: &Path) -> Result<i32> {
    let base_case = load_case(case_args)?;
    fs::create_dir_all(out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
    let mut summary = String::from("param,value,converged,df_primary_hz,df_secondary_hz,ace_primary_mw,ace_secondary_mw\n");
    let mut code = EXIT_OK;
    let name = match param {
        SweepParam::SmoothingHz => "smoothing-hz",
        SweepParam::LoadScale => "load-scale",
    };
    for &v in values {
        let mut opts = solver.options();
        let case = match param {
            SweepParam::SmoothingHz => {
                opts.smoothing_hz = v;
                base_case.clone()
            }
            SweepParam::LoadScale => crate::orchestrator::apply_event(&base_case, &Event::LoadScale { factor: v })?,
        };
        let (results, error) = collect(run_cycle(&case, None, Stages::Both, &opts, 1))?;
        let file = ResultsFile::new(&results, Vec::new(), error);
        write_text(&out.join(format!("{name}_{}.json", format_value(v))), &to_precise_json(&file)?)?;
        let converged = file.all_converged() && file.stages.len() == 2;
        if !converged {
            code = EXIT_NOT_CONVERGED;
        }
        let pick = |i: usize, f: &dyn Fn(&crate::io::StageRecord) -> f64| {
            file.stages.get(i).map_or(String::new(), |s| format!("{:.12e}", f(s)))
        };
        let ace = |s: &crate::io::StageRecord| s.ace_by_area_mw.values().sum::<f64>();
        let _ = writeln!(
            summary,
            "{name},{v},{converged},{},{},{},{}",
            pick(0, &|s| s.df_hz),
            pick(1, &|s| s.df_hz),
            pick(0, &ace),
            pick(1, &ace)
        );
    }
    write_text(&out.join("sweep.csv"), &summary)?;
    print!("{summary}");
    Ok(code)
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub buses: usize,
    pub branches: usize,
    pub generators: usize,
    pub seed: u64,
    pub outage_generator: u32,
    pub converged: bool,
    pub stage1_iterations: usize,
    pub stage2_iterations: usize,
    pub stage1_seconds: f64,
    pub stage2_seconds: f64,
    pub total_seconds: f64,
    pub seconds_per_iteration: f64,
    pub df_primary_hz: f64,
    pub df_secondary_hz: f64,
}

/// Builds the synthetic grid, trips its largest non-slack generator and
/// solves stage 1 from flat start and stage 2 warm.
pub fn bench(n: usize, seed: u64, opts: &SolverOptions) -> Result<BenchReport> {
    let case = to_per_unit(&synthetic_case(&SynthParams::new(n, seed), opts)?)?;
    let outage = largest_non_slack_generator(&case)
        .ok_or_else(|| Error::Parameter("grid has no generator to trip".into()))?;
    let tripped = crate::orchestrator::apply_event(&case, &Event::GeneratorOutage { id: outage })?;
    let start = Instant::now();
    let (results, _) = collect(run_cycle(&tripped, None, Stages::Both, opts, 1))?;
    let total = start.elapsed().as_secs_f64();
    let it = |i: usize| results.get(i).map_or(0, |r| r.report.iterations);
    let secs = |i: usize| results.get(i).map_or(0.0, |r| r.report.wall_time_s);
    let df = |i: usize| results.get(i).map_or(f64::NAN, |r| r.df);
    let iterations = it(0) + it(1);
    Ok(BenchReport {
        buses: case.buses.len(),
        branches: case.branches.len(),
        generators: case.generators.len(),
        seed,
        outage_generator: outage,
        converged: results.len() == 2 && results.iter().all(|r| r.report.converged),
        stage1_iterations: it(0),
        stage2_iterations: it(1),
        stage1_seconds: secs(0),
        stage2_seconds: secs(1),
        total_seconds: total,
        seconds_per_iteration: (secs(0) + secs(1)) / iterations.max(1) as f64,
        df_primary_hz: df(0),
        df_secondary_hz: df(1),
    })
}

fn run_bench(n: usize, seed: u64, opts: &SolverOptions, out: &Path) -> Result<i32> {
    let report = bench(n, seed, opts)?;
    write_text(out, &to_precise_json(&report)?)?;
    println!(
        "{} buses: converged={} iterations={}+{} time={:.3}s",
        report.buses, report.converged, report.stage1_iterations, report.stage2_iterations, report.total_seconds
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Runs a parsed command and maps errors to exit codes.
pub fn execute(cli: &Cli) -> i32 {
    let res = match &cli.command {
        Command::Solve { case, events, stage, solver, out, csv } => {
            run_solve(case, events.as_deref(), *stage, &solver.options(), out, csv.as_deref())
        }
        Command::Validate { case } => run_validate(case),
        Command::Sweep { case, param, values, solver, out } => run_sweep(case, *param, values, solver, out),
        Command::Bench { buses, seed, solver, out } => run_bench(*buses, *seed, &solver.options(), out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
                _ => EXIT_INPUT,
            }
        }
    }
}

/// Entry point taking raw arguments, including the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}
