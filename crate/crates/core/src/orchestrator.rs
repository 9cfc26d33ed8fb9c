//! Temporally ordered steady states.
//!
//! A disturbance is followed first by the primary (droop) steady state and
//! then by the secondary (AGC) steady state. AGC setpoints come from the ACE
//! measured at the primary steady state and stay frozen while the secondary
//! steady state is solved. Timelines repeat this cycle for every network event,
//! warm-starting from the previous solution.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::freq::{compute_ace, secondary_setpoints, AceMeasurement};
use crate::network::{to_per_unit, unreachable_buses, validate, NetworkCase, Status};
use crate::solver::{
    active_losses, area_exports, solve_model, unit_outputs, FrequencyClosure, SolveReport,
    SolverModel, SolverOptions, SolverState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    /// Pre-disturbance dispatch at nominal frequency.
    Base,
    /// Steady state after primary control only.
    PostPrimary,
    /// Steady state after primary plus frozen AGC setpoints.
    PostSecondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLabel {
    pub kind: StageKind,
    /// Event cycle; the base solve is cycle 0.
    pub cycle: usize,
}

impl StageLabel {
    /// Time index in the t1, t2, t3, ... numbering.
    pub fn time_index(&self) -> usize {
        match self.kind {
            StageKind::Base => 1,
            StageKind::PostPrimary => 2 * self.cycle,
            StageKind::PostSecondary => 2 * self.cycle + 1,
        }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            StageKind::Base => "base",
            StageKind::PostPrimary => "primary",
            StageKind::PostSecondary => "secondary",
        };
        write!(f, "t{}-{kind}", self.time_index())
    }
}

/// Per-generator breakdown `p_total = p_set + dp_primary + dp_secondary`, pu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenDispatch {
    pub id: u32,
    pub bus_id: u32,
    pub p_set: f64,
    pub dp_primary: f64,
    pub dp_secondary: f64,
    pub p_total: f64,
    pub q: f64,
}

#[derive(Debug, Clone)]
pub struct StageResult {
    pub label: StageLabel,
    pub state: SolverState,
    pub report: SolveReport,
    /// In-service generators only.
    pub dispatch: Vec<GenDispatch>,
    pub df: f64,
    /// ACE evaluated at this stage's own operating point.
    pub ace_by_area: BTreeMap<u32, AceMeasurement>,
    /// Frozen measurements that produced the AGC setpoints (secondary stage
    /// only).
    pub agc_inputs: BTreeMap<u32, AceMeasurement>,
    /// Net tie-line export per area, pu.
    pub area_export: BTreeMap<u32, f64>,
    pub losses: f64,
    pub mva_base: f64,
}

impl StageResult {
    pub fn total_ace(&self) -> f64 {
        self.ace_by_area.values().map(|m| m.ace).sum()
    }

    pub fn dispatch_of(&self, gen_id: u32) -> Option<&GenDispatch> {
        self.dispatch.iter().find(|d| d.id == gen_id)
    }
}

fn finish(
    case: &NetworkCase,
    model: &SolverModel,
    label: StageLabel,
    state: SolverState,
    report: SolveReport,
    secondary: &[f64],
    closure: FrequencyClosure,
    agc_inputs: BTreeMap<u32, AceMeasurement>,
) -> Result<StageResult> {
    let outputs = unit_outputs(model, &state, secondary, closure);
    let dispatch = model
        .gens
        .iter()
        .zip(outputs)
        .map(|(unit, o)| GenDispatch {
            id: o.id,
            bus_id: model.layout.bus_ids[unit.bus],
            p_set: o.p_set,
            dp_primary: o.dp_primary,
            dp_secondary: o.dp_secondary,
            p_total: o.p,
            q: o.q,
        })
        .collect();
    let mut result = StageResult {
        label,
        df: state.df(),
        dispatch,
        ace_by_area: BTreeMap::new(),
        agc_inputs,
        area_export: area_exports(model, &state),
        losses: active_losses(model, &state),
        mva_base: case.mva_base,
        state,
        report,
    };
    for area in &case.areas {
        let m = compute_ace(area, &result)?;
        result.ace_by_area.insert(area.id, m);
    }
    if result.report.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged { label: label.to_string(), result: Box::new(result) })
    }
}

fn start_state(model: &SolverModel, initial: Option<&SolverState>) -> SolverState {
    match initial {
        Some(s) => model.adopt(s),
        None => model.flat_start(),
    }
}

/// Conventional fixed-frequency solve: controls off, Δf = 0, the slack takes
/// up the mismatch.
pub fn run_base(
    case: &NetworkCase,
    initial: Option<&SolverState>,
    opts: &SolverOptions,
) -> Result<StageResult> {
    let model = SolverModel::build(case, opts.smoothing_hz)?;
    let secondary = vec![0.0; model.gens.len()];
    let closure = FrequencyClosure::Pinned;
    let (state, report) =
        solve_model(&model, &start_state(&model, initial), &secondary, closure, opts)?;
    let label = StageLabel { kind: StageKind::Base, cycle: 0 };
    finish(case, &model, label, state, report, &secondary, closure, BTreeMap::new())
}

/// Primary-control steady state with all AGC setpoints at zero.
pub fn run_stage1(
    case: &NetworkCase,
    initial: Option<&SolverState>,
    opts: &SolverOptions,
    cycle: usize,
) -> Result<StageResult> {
    let model = SolverModel::build(case, opts.smoothing_hz)?;
    let secondary = vec![0.0; model.gens.len()];
    let closure = closure_for(case);
    let (state, mut report) =
        solve_model(&model, &start_state(&model, initial), &secondary, closure, opts)?;
    note_closure(closure, &mut report);
    let label = StageLabel { kind: StageKind::PostPrimary, cycle };
    finish(case, &model, label, state, report, &secondary, closure, BTreeMap::new())
}

/// AGC steady state: ACE is measured at `stage1`, turned into frozen
/// setpoints, and the system is re-solved from `stage1`'s state.
pub fn run_stage2(
    case: &NetworkCase,
    stage1: &StageResult,
    opts: &SolverOptions,
) -> Result<StageResult> {
    let mut inputs = BTreeMap::new();
    for area in &case.areas {
        inputs.insert(area.id, compute_ace(area, stage1)?);
    }
    let setpoints = secondary_setpoints(case, &inputs);
    run_stage2_with(case, &stage1.state, &setpoints, inputs, opts, stage1.label.cycle)
}

/// Secondary solve with explicit setpoints (generator id -> ΔP^s, pu).
pub fn run_stage2_with(
    case: &NetworkCase,
    initial: &SolverState,
    setpoints: &BTreeMap<u32, f64>,
    inputs: BTreeMap<u32, AceMeasurement>,
    opts: &SolverOptions,
    cycle: usize,
) -> Result<StageResult> {
    let model = SolverModel::build(case, opts.smoothing_hz)?;
    let secondary = model.secondary_vector(setpoints);
    let closure = closure_for(case);
    let (state, mut report) =
        solve_model(&model, &model.adopt(initial), &secondary, closure, opts)?;
    note_closure(closure, &mut report);
    let label = StageLabel { kind: StageKind::PostSecondary, cycle };
    finish(case, &model, label, state, report, &secondary, closure, inputs)
}

fn closure_for(case: &NetworkCase) -> FrequencyClosure {
    if case.has_frequency_coupling() {
        FrequencyClosure::Coupled
    } else {
        FrequencyClosure::Pinned
    }
}

fn note_closure(closure: FrequencyClosure, report: &mut SolveReport) {
    if closure == FrequencyClosure::Pinned {
        report
            .warnings
            .insert(0, "no frequency-coupled devices: df pinned at 0, slack absorbs mismatch".into());
    }
}

/// A network change that starts a new control cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    GeneratorOutage { id: u32 },
    BranchOutage { id: u32 },
    /// Multiplies every load's nominal P and Q.
    LoadScale { factor: f64 },
    /// Replaces one load's nominal powers, MW / MVAr.
    LoadOverride { id: u32, p0: f64, q0: f64 },
    ReplaceCase(Box<NetworkCase>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventScript {
    pub events: Vec<Event>,
}

/// Applies one event and revalidates the result.
pub fn apply_event(case: &NetworkCase, event: &Event) -> Result<NetworkCase> {
    let mut out = case.clone();
    let scale = if case.per_unit { 1.0 / case.mva_base } else { 1.0 };
    match event {
        Event::GeneratorOutage { id } => {
            let g = out
                .generators
                .iter_mut()
                .find(|g| g.id == *id)
                .ok_or(Error::MissingId { kind: "generator", id: *id })?;
            g.status = Status::Out;
        }
        Event::BranchOutage { id } => {
            let b = out
                .branches
                .iter_mut()
                .find(|b| b.id == *id)
                .ok_or(Error::MissingId { kind: "branch", id: *id })?;
            b.status = Status::Out;
            let island = unreachable_buses(&out);
            if !island.is_empty() {
                return Err(Error::Islanded(island));
            }
        }
        Event::LoadScale { factor } => {
            if !(factor.is_finite() && *factor >= 0.0) {
                return Err(Error::Parameter(format!("load scale must be nonnegative, got {factor}")));
            }
            for l in &mut out.loads {
                l.p0 *= factor;
                l.q0 *= factor;
            }
        }
        Event::LoadOverride { id, p0, q0 } => {
            let l = out
                .loads
                .iter_mut()
                .find(|l| l.id == *id)
                .ok_or(Error::MissingId { kind: "load", id: *id })?;
            l.p0 = p0 * scale;
            l.q0 = q0 * scale;
        }
        Event::ReplaceCase(new_case) => {
            out = if case.per_unit { to_per_unit(new_case)? } else { (**new_case).clone() };
        }
    }
    validate(&out).into_result()?;
    Ok(out)
}

/// Moves the slack setpoint to the output found by the base solve, so that
/// the pre-disturbance case is balanced at nominal frequency.
pub fn rebalance_slack(case: &NetworkCase, base: &StageResult) -> (NetworkCase, Vec<String>) {
    let mut out = case.clone();
    let mut warnings = Vec::new();
    let Some(slack) = case.slack_bus().map(|b| b.id) else {
        return (out, warnings);
    };
    for g in out.generators.iter_mut().filter(|g| g.bus_id == slack && g.status.in_service()) {
        if let Some(d) = base.dispatch_of(g.id) {
            let p = d.p_total.clamp(g.p_min, g.p_max);
            if p != d.p_total {
                warnings.push(format!(
                    "slack generator {} base output {:.6} pu clamped to its limits",
                    g.id, d.p_total
                ));
            }
            g.p_set = p;
        }
    }
    (out, warnings)
}

/// Folds the achieved AGC setpoints into each generator's scheduled output so
/// they persist into the next cycle.
pub fn carry_secondary(case: &NetworkCase, stage2: &StageResult) -> NetworkCase {
    let mut out = case.clone();
    for g in &mut out.generators {
        if let Some(d) = stage2.dispatch_of(g.id) {
            g.p_set = (g.p_set + d.dp_secondary).clamp(g.p_min, g.p_max);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stages {
    BaseOnly,
    PrimaryOnly,
    #[default]
    Both,
}

#[derive(Debug)]
pub struct Timeline {
    pub results: Vec<StageResult>,
    /// Set when an event or a solve failed; `results` holds everything
    /// computed before that point.
    pub failure: Option<Error>,
    pub warnings: Vec<String>,
}

/// One control cycle (primary, then optionally secondary) on `case`.
pub fn run_cycle(
    case: &NetworkCase,
    initial: Option<&SolverState>,
    stages: Stages,
    opts: &SolverOptions,
    cycle: usize,
) -> Result<Vec<StageResult>> {
    let s1 = run_stage1(case, initial, opts, cycle)?;
    if stages == Stages::PrimaryOnly {
        return Ok(vec![s1]);
    }
    let s2 = run_stage2(case, &s1, opts)?;
    Ok(vec![s1, s2])
}

/// Base solve followed by one control cycle per event.
pub fn run_timeline(
    case: &NetworkCase,
    script: &EventScript,
    stages: Stages,
    opts: &SolverOptions,
) -> Result<Timeline> {
    let case = to_per_unit(case)?;
    validate(&case).into_result()?;
    let mut timeline = Timeline { results: Vec::new(), failure: None, warnings: Vec::new() };

    let base = match run_base(&case, None, opts) {
        Ok(b) => b,
        Err(Error::NotConverged { label, result }) => {
            timeline.results.push((*result).clone());
            timeline.failure = Some(Error::NotConverged { label, result });
            return Ok(timeline);
        }
        Err(e) => return Err(e),
    };
    let (mut current, warnings) = rebalance_slack(&case, &base);
    timeline.warnings.extend(warnings);
    let mut last_state = base.state.clone();
    timeline.results.push(base);
    if stages == Stages::BaseOnly {
        return Ok(timeline);
    }

    for (i, event) in script.events.iter().enumerate() {
        let cycle = i + 1;
        current = match apply_event(&current, event) {
            Ok(c) => c,
            Err(e) => {
                timeline.failure = Some(e);
                return Ok(timeline);
            }
        };
        let s1 = match run_stage1(&current, Some(&last_state), opts, cycle) {
            Ok(s) => s,
            Err(e) => return Ok(fail(timeline, e)),
        };
        last_state = s1.state.clone();
        if stages == Stages::PrimaryOnly {
            timeline.results.push(s1);
            continue;
        }
        let s2 = match run_stage2(&current, &s1, opts) {
            Ok(s) => s,
            Err(e) => {
                timeline.results.push(s1);
                return Ok(fail(timeline, e));
            }
        };
        timeline.results.push(s1);
        current = carry_secondary(&current, &s2);
        last_state = s2.state.clone();
        timeline.results.push(s2);
    }
    Ok(timeline)
}

fn fail(mut timeline: Timeline, e: Error) -> Timeline {
    if let Error::NotConverged { result, .. } = &e {
        timeline.results.push((**result).clone());
    }
    timeline.failure = Some(e);
    timeline
}
