use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::freq::{DroopRegion, DEFAULT_SMOOTHING_HZ};
use crate::network::NetworkCase;
use crate::solver::assemble::{assemble, assemble_residuals, FrequencyClosure};
use crate::solver::flows::unit_outputs;
use crate::solver::linear::{LinearError, SparseLu};
use crate::solver::model::{SolverModel, SolverState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual infinity-norm tolerance, pu.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest voltage update per iteration, pu.
    pub step_cap: f64,
    /// Largest Δf update per iteration, Hz.
    pub df_step_cap: f64,
    /// Droop patch width, Hz.
    pub smoothing_hz: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            step_cap: 0.1,
            df_step_cap: 0.2,
            smoothing_hz: DEFAULT_SMOOTHING_HZ,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.tol) && pos(self.step_cap) && pos(self.df_step_cap) && pos(self.smoothing_hz))
            || self.max_iter == 0
        {
            return Err(Error::Parameter(format!("solver options must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// Residual infinity-norm before each update, plus the final one.
    pub residual_history: Vec<f64>,
    pub warnings: Vec<String>,
    pub closure: FrequencyClosure,
    /// Wall time spent in the solve, seconds. Not part of any serialized
    /// result.
    pub wall_time_s: f64,
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn linear_error(model: &SolverModel, e: LinearError) -> Error {
    match e {
        LinearError::Singular { column: pos } | LinearError::NonFinite { index: pos } => {
            let (bus_id, unknown) = model.layout.describe(pos);
            Error::SingularJacobian { bus_id, unknown }
        }
        LinearError::Internal(msg) => Error::Parameter(format!("linear solver: {msg}")),
    }
}

/// Damped Newton-Raphson on a compiled model.
///
/// Each update is scaled uniformly so that no voltage component moves by more
/// than `step_cap` and Δf by no more than `df_step_cap`.
pub fn solve_model(
    model: &SolverModel,
    initial: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
    opts: &SolverOptions,
) -> Result<(SolverState, SolveReport)> {
    opts.check()?;
    model.check_state(initial)?;
    let start = Instant::now();
    let l = &model.layout;
    let n_volt = 2 * l.n_bus();
    let df_pos = l.df();

    let mut state = initial.clone();
    let mut history = Vec::new();
    let mut lu: Option<SparseLu> = None;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let norm;
        if iterations == opts.max_iter {
            let f = assemble_residuals(model, &state, secondary, closure)?;
            norm = inf_norm(&f);
            history.push(norm);
            converged = norm <= opts.tol;
            break;
        }
        let (mut f, jac) = assemble(model, &state, secondary, closure)?;
        norm = inf_norm(&f);
        history.push(norm);
        if norm <= opts.tol {
            converged = true;
            break;
        }
        if !norm.is_finite() {
            break;
        }
        let solver = match lu.as_mut() {
            Some(s) => s,
            None => lu.insert(
                SparseLu::analyse(jac.n, &jac.pattern()).map_err(|e| linear_error(model, e))?,
            ),
        };
        solver.solve(&jac.vals, &mut f).map_err(|e| linear_error(model, e))?;
        let dx = f;

        let max_dv = inf_norm(&dx[..n_volt]);
        let mut alpha: f64 = 1.0;
        if max_dv > opts.step_cap {
            alpha = alpha.min(opts.step_cap / max_dv);
        }
        if dx[df_pos].abs() > opts.df_step_cap {
            alpha = alpha.min(opts.df_step_cap / dx[df_pos].abs());
        }
        for (xi, di) in state.x.iter_mut().zip(&dx) {
            *xi -= alpha * di;
        }
        iterations += 1;
    }

    let final_residual_norm = *history.last().unwrap_or(&f64::INFINITY);
    let mut warnings = Vec::new();
    if converged {
        collect_warnings(model, &state, secondary, closure, &mut warnings);
    }
    let report = SolveReport {
        converged,
        iterations,
        final_residual_norm,
        residual_history: history,
        warnings,
        closure,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((state, report))
}

fn collect_warnings(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
    out: &mut Vec<String>,
) {
    let df = state.df();
    let outputs = unit_outputs(model, state, secondary, closure);
    for (unit, o) in model.gens.iter().zip(&outputs) {
        if closure == FrequencyClosure::Coupled {
            let region = unit.droop.region(df);
            if region.is_saturating() {
                let side = match region {
                    DroopRegion::AtMax | DroopRegion::PatchMax => "upper",
                    _ => "lower",
                };
                out.push(format!(
                    "generator {} primary response in {:?} region ({side} limit) at df = {df:.6} Hz",
                    unit.id, region
                ));
            }
        }
        let slack_tol = 1e-9;
        if o.p > unit.p_max + slack_tol || o.p < unit.p_min - slack_tol {
            out.push(format!(
                "generator {} total output {:.6} pu outside [{:.6}, {:.6}]",
                unit.id, o.p, unit.p_min, unit.p_max
            ));
        }
    }
}

/// Solves a per-unit case with the given secondary setpoints (by generator
/// id). Cases with no frequency-coupled device fall back to a pinned Δf with
/// a classic slack, since Δf would otherwise be undetermined.
pub fn nr_solve(
    case: &NetworkCase,
    initial: &SolverState,
    secondary: &BTreeMap<u32, f64>,
    opts: &SolverOptions,
) -> Result<(SolverState, SolveReport)> {
    let model = SolverModel::build(case, opts.smoothing_hz)?;
    let closure = if case.has_frequency_coupling() {
        FrequencyClosure::Coupled
    } else {
        FrequencyClosure::Pinned
    };
    let sec = model.secondary_vector(secondary);
    let (state, mut report) = solve_model(&model, initial, &sec, closure, opts)?;
    if closure == FrequencyClosure::Pinned {
        report
            .warnings
            .insert(0, "no frequency-coupled devices: df pinned at 0, slack absorbs mismatch".into());
    }
    Ok((state, report))
}
