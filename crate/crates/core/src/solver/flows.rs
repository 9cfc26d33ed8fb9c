//! Post-solve quantities: branch flows, losses, tie-line exports and the
//! power balance used by the consistency checks.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::freq::scaled_load;
use crate::solver::assemble::FrequencyClosure;
use crate::solver::model::{BusRole, SolverModel, SolverState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFlow {
    pub id: u32,
    pub s_from: Complex64,
    pub s_to: Complex64,
}

pub fn branch_flows(model: &SolverModel, state: &SolverState) -> Vec<BranchFlow> {
    model
        .branches
        .iter()
        .map(|b| {
            let (vf, vt) = (state.voltage(b.from), state.voltage(b.to));
            let i_f = b.y_ff * vf + b.y_ft * vt;
            let i_t = b.y_tf * vf + b.y_tt * vt;
            BranchFlow { id: b.id, s_from: vf * i_f.conj(), s_to: vt * i_t.conj() }
        })
        .collect()
}

/// Total active losses, pu.
pub fn active_losses(model: &SolverModel, state: &SolverState) -> f64 {
    branch_flows(model, state).iter().map(|f| f.s_from.re + f.s_to.re).sum()
}

/// Net active export of each area over its tie lines, pu.
pub fn area_exports(model: &SolverModel, state: &SolverState) -> BTreeMap<u32, f64> {
    let mut out: BTreeMap<u32, f64> = model.area_ids.iter().map(|&a| (a, 0.0)).collect();
    for (b, flow) in model.branches.iter().zip(branch_flows(model, state)) {
        let (af, at) = (model.area_of[b.from], model.area_of[b.to]);
        if af != at {
            *out.entry(af).or_default() += flow.s_from.re;
            *out.entry(at).or_default() += flow.s_to.re;
        }
    }
    out
}

/// Complex power delivered by the slack generators.
pub fn slack_power(model: &SolverModel, state: &SolverState) -> Complex64 {
    state.voltage(model.layout.slack) * state.slack_current().conj()
}

/// Active and reactive output of every generator unit at `state`.
///
/// Under the coupled closure each unit reports its own target, which for the
/// slack units sums to the measured `V·I` once converged. Under the pinned
/// closure the slack units split the unscheduled part of `V·I` evenly.
/// Reactive output of a bus is split evenly among its units.
pub fn unit_outputs(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
) -> Vec<UnitOutput> {
    let df = state.df();
    let slack = model.layout.slack;
    let s_slack = slack_power(model, state);
    let mut out: Vec<UnitOutput> = model
        .gens
        .iter()
        .enumerate()
        .map(|(g, unit)| {
            let dp_primary = match closure {
                FrequencyClosure::Coupled => unit.droop.eval(df),
                FrequencyClosure::Pinned => 0.0,
            };
            UnitOutput {
                id: unit.id,
                p_set: unit.p_set,
                dp_primary,
                dp_secondary: secondary[g],
                p: unit.p_set + dp_primary + secondary[g],
                q: 0.0,
            }
        })
        .collect();

    for (bus, units) in model.gens_at.iter().enumerate() {
        if units.is_empty() {
            continue;
        }
        let share = 1.0 / units.len() as f64;
        let q_bus = match model.roles[bus] {
            BusRole::PV(j) => state.q(j),
            BusRole::Slack => s_slack.im,
            BusRole::PQ => 0.0,
        };
        for &g in units {
            out[g].q = q_bus * share;
        }
        if bus == slack && closure == FrequencyClosure::Pinned {
            // the slack absorbs the mismatch: spread it evenly
            let scheduled: f64 = units.iter().map(|&g| out[g].p).sum();
            let extra = (s_slack.re - scheduled) * share;
            for &g in units {
                out[g].p += extra;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitOutput {
    pub id: u32,
    pub p_set: f64,
    pub dp_primary: f64,
    pub dp_secondary: f64,
    pub p: f64,
    pub q: f64,
}

/// Total generation, total load and losses in pu, all measured at `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBalance {
    pub generation: f64,
    pub load: f64,
    pub losses: f64,
}

impl PowerBalance {
    pub fn mismatch(&self) -> f64 {
        self.generation - self.load - self.losses
    }
}

pub fn power_balance(
    model: &SolverModel,
    state: &SolverState,
    secondary: &[f64],
    closure: FrequencyClosure,
) -> PowerBalance {
    let df = state.df();
    let slack = model.layout.slack;
    let mut generation = slack_power(model, state).re;
    for (g, unit) in model.gens.iter().enumerate() {
        if unit.bus == slack {
            continue;
        }
        generation += unit.p_set + secondary[g];
        if closure == FrequencyClosure::Coupled {
            generation += unit.droop.eval(df);
        }
    }
    let mut load = 0.0;
    for (bus, loads) in model.loads_at.iter().enumerate() {
        let v = state.voltage(bus).norm();
        for l in loads {
            load += scaled_load(l, v, df).0;
        }
    }
    PowerBalance { generation, load, losses: active_losses(model, state) }
}
