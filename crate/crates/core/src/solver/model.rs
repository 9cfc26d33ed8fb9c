//! Per-unit case compiled into index-based arrays, and the layout of the
//! unknown vector.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freq::{build_droop_model, SmoothDroopModel};
use crate::network::{validate, BusId, BusKind, Load, NetworkCase};

/// Position of every unknown in the flat state vector.
///
/// `[v_r0, v_i0, v_r1, v_i1, ..., q_pv0, q_pv1, ..., i_r_s, i_i_s, df]`
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub bus_ids: Vec<BusId>,
    /// Bus index of each PV unknown, in order.
    pub pv_buses: Vec<usize>,
    pub slack: usize,
}

/// What a position of the state vector stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    VoltageReal(usize),
    VoltageImag(usize),
    ReactivePower(usize),
    SlackCurrentReal,
    SlackCurrentImag,
    FrequencyDeviation,
}

impl StateLayout {
    pub fn n_bus(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn len(&self) -> usize {
        2 * self.n_bus() + self.pv_buses.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn vr(&self, bus: usize) -> usize {
        2 * bus
    }

    #[inline]
    pub fn vi(&self, bus: usize) -> usize {
        2 * bus + 1
    }

    #[inline]
    pub fn q(&self, pv: usize) -> usize {
        2 * self.n_bus() + pv
    }

    #[inline]
    pub fn slack_ir(&self) -> usize {
        2 * self.n_bus() + self.pv_buses.len()
    }

    #[inline]
    pub fn slack_ii(&self) -> usize {
        self.slack_ir() + 1
    }

    #[inline]
    pub fn df(&self) -> usize {
        self.len() - 1
    }

    pub fn unknown(&self, pos: usize) -> Unknown {
        let nb2 = 2 * self.n_bus();
        if pos < nb2 {
            if pos % 2 == 0 {
                Unknown::VoltageReal(pos / 2)
            } else {
                Unknown::VoltageImag(pos / 2)
            }
        } else if pos < self.slack_ir() {
            Unknown::ReactivePower(self.pv_buses[pos - nb2])
        } else if pos == self.slack_ir() {
            Unknown::SlackCurrentReal
        } else if pos == self.slack_ii() {
            Unknown::SlackCurrentImag
        } else {
            Unknown::FrequencyDeviation
        }
    }

    /// Bus id owning a position, with a short name of the unknown.
    pub fn describe(&self, pos: usize) -> (BusId, String) {
        let slack = self.bus_ids[self.slack];
        match self.unknown(pos) {
            Unknown::VoltageReal(b) => (self.bus_ids[b], "v_r".into()),
            Unknown::VoltageImag(b) => (self.bus_ids[b], "v_i".into()),
            Unknown::ReactivePower(b) => (self.bus_ids[b], "q_g".into()),
            Unknown::SlackCurrentReal => (slack, "i_r_s".into()),
            Unknown::SlackCurrentImag => (slack, "i_i_s".into()),
            Unknown::FrequencyDeviation => (slack, "df".into()),
        }
    }
}

/// A solver iterate: the flat unknown vector and its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub layout: StateLayout,
}

impl SolverState {
    pub fn voltage(&self, bus: usize) -> Complex64 {
        Complex64::new(self.x[self.layout.vr(bus)], self.x[self.layout.vi(bus)])
    }

    pub fn df(&self) -> f64 {
        self.x[self.layout.df()]
    }

    pub fn slack_current(&self) -> Complex64 {
        Complex64::new(self.x[self.layout.slack_ir()], self.x[self.layout.slack_ii()])
    }

    pub fn q(&self, pv: usize) -> f64 {
        self.x[self.layout.q(pv)]
    }
}

#[derive(Debug, Clone)]
pub struct GenUnit {
    pub id: u32,
    pub bus: usize,
    pub p_set: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub kappa: f64,
    pub agc: bool,
    pub droop: SmoothDroopModel,
}

#[derive(Debug, Clone)]
pub struct BranchModel {
    pub id: u32,
    pub from: usize,
    pub to: usize,
    pub y_ff: Complex64,
    pub y_ft: Complex64,
    pub y_tf: Complex64,
    pub y_tt: Complex64,
}

/// Effective role of a bus inside the solver. A PV bus whose generators are
/// all out of service behaves as PQ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusRole {
    Slack,
    PV(usize),
    PQ,
}

#[derive(Debug, Clone)]
pub struct SolverModel {
    pub layout: StateLayout,
    pub roles: Vec<BusRole>,
    pub v_set: Vec<f64>,
    pub slack_voltage: Complex64,
    /// Bus admittance matrix by row, entries sorted by column.
    pub ybus: Vec<Vec<(usize, Complex64)>>,
    pub branches: Vec<BranchModel>,
    pub gens: Vec<GenUnit>,
    pub gens_at: Vec<Vec<usize>>,
    pub loads_at: Vec<Vec<Load>>,
    pub area_of: Vec<u32>,
    pub area_ids: Vec<u32>,
    pub index: HashMap<BusId, usize>,
}

impl SolverModel {
    /// Compiles a validated per-unit case. `smoothing_hz` is the droop patch
    /// width.
    pub fn build(case: &NetworkCase, smoothing_hz: f64) -> Result<Self> {
        if !case.per_unit {
            return Err(Error::Units("solver needs a per-unit case".into()));
        }
        validate(case).into_result()?;

        let bus_ids: Vec<BusId> = case.buses.iter().map(|b| b.id).collect();
        let index: HashMap<BusId, usize> =
            bus_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = bus_ids.len();

        let mut gens = Vec::new();
        let mut gens_at = vec![Vec::new(); n];
        for g in case.generators.iter().filter(|g| g.status.in_service()) {
            let bus = index[&g.bus_id];
            gens_at[bus].push(gens.len());
            gens.push(GenUnit {
                id: g.id,
                bus,
                p_set: g.p_set,
                p_min: g.p_min,
                p_max: g.p_max,
                kappa: g.kappa,
                agc: g.agc,
                droop: build_droop_model(g, smoothing_hz)?,
            });
        }

        let mut loads_at = vec![Vec::new(); n];
        for l in case.loads.iter().filter(|l| l.status.in_service()) {
            loads_at[index[&l.bus_id]].push(l.clone());
        }

        let mut roles = Vec::with_capacity(n);
        let mut pv_buses = Vec::new();
        let mut slack = 0;
        let mut v_set = vec![1.0; n];
        let mut slack_voltage = Complex64::new(1.0, 0.0);
        for (i, b) in case.buses.iter().enumerate() {
            let role = match b.kind {
                BusKind::Slack => {
                    slack = i;
                    let v = b.v_set.unwrap_or(1.0);
                    v_set[i] = v;
                    slack_voltage = Complex64::from_polar(v, b.angle_set.unwrap_or(0.0));
                    BusRole::Slack
                }
                BusKind::PV if !gens_at[i].is_empty() => {
                    v_set[i] = b.v_set.unwrap_or(1.0);
                    pv_buses.push(i);
                    BusRole::PV(pv_buses.len() - 1)
                }
                _ => BusRole::PQ,
            };
            roles.push(role);
        }

        let mut branches = Vec::new();
        let mut ybus_map: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
        for br in case.branches.iter().filter(|b| b.status.in_service()) {
            let (f, t) = (index[&br.from_bus], index[&br.to_bus]);
            let ys = Complex64::new(br.r, br.x).inv();
            let bc = Complex64::new(0.0, 0.5 * br.b_sh);
            let tap = br.tap;
            let m = BranchModel {
                id: br.id,
                from: f,
                to: t,
                y_ff: (ys + bc) / (tap * tap),
                y_ft: -ys / tap,
                y_tf: -ys / tap,
                y_tt: ys + bc,
            };
            *ybus_map[f].entry(f).or_default() += m.y_ff;
            *ybus_map[f].entry(t).or_default() += m.y_ft;
            *ybus_map[t].entry(f).or_default() += m.y_tf;
            *ybus_map[t].entry(t).or_default() += m.y_tt;
            branches.push(m);
        }
        let ybus = ybus_map.into_iter().map(|row| row.into_iter().collect()).collect();

        let area_of = case.buses.iter().map(|b| b.area_id).collect();
        let area_ids = case.areas.iter().map(|a| a.id).collect();

        Ok(SolverModel {
            layout: StateLayout { bus_ids, pv_buses, slack },
            roles,
            v_set,
            slack_voltage,
            ybus,
            branches,
            gens,
            gens_at,
            loads_at,
            area_of,
            area_ids,
            index,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.layout.n_bus()
    }

    /// Voltage 1∠0 everywhere except the slack, which sits at its setpoint;
    /// zero reactive powers, slack currents and Δf.
    pub fn flat_start(&self) -> SolverState {
        let l = &self.layout;
        let mut x = vec![0.0; l.len()];
        for b in 0..l.n_bus() {
            x[l.vr(b)] = 1.0;
        }
        x[l.vr(l.slack)] = self.slack_voltage.re;
        x[l.vi(l.slack)] = self.slack_voltage.im;
        SolverState { x, layout: l.clone() }
    }

    /// Warm start: carries voltages, reactive outputs, slack currents and Δf
    /// over from a state of another (possibly modified) case, matching buses by
    /// id. Anything without a counterpart starts flat.
    pub fn adopt(&self, prev: &SolverState) -> SolverState {
        let mut s = self.flat_start();
        let l = &self.layout;
        let pl = &prev.layout;
        let prev_index: HashMap<BusId, usize> =
            pl.bus_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        for (k, id) in l.bus_ids.iter().enumerate() {
            if let Some(&pk) = prev_index.get(id) {
                s.x[l.vr(k)] = prev.x[pl.vr(pk)];
                s.x[l.vi(k)] = prev.x[pl.vi(pk)];
            }
        }
        let prev_pv: HashMap<BusId, usize> =
            pl.pv_buses.iter().enumerate().map(|(j, &b)| (pl.bus_ids[b], j)).collect();
        for (j, &b) in l.pv_buses.iter().enumerate() {
            if let Some(&pj) = prev_pv.get(&l.bus_ids[b]) {
                s.x[l.q(j)] = prev.x[pl.q(pj)];
            }
        }
        if pl.bus_ids[pl.slack] == l.bus_ids[l.slack] {
            s.x[l.slack_ir()] = prev.x[pl.slack_ir()];
            s.x[l.slack_ii()] = prev.x[pl.slack_ii()];
        }
        s.x[l.df()] = prev.df();
        s
    }

    /// Secondary setpoints keyed by generator id, laid out in unit order.
    pub fn secondary_vector(&self, secondary: &BTreeMap<u32, f64>) -> Vec<f64> {
        self.gens.iter().map(|g| secondary.get(&g.id).copied().unwrap_or(0.0)).collect()
    }

    /// Checks that `state` was produced for this model's layout.
    pub fn check_state(&self, state: &SolverState) -> Result<()> {
        if state.layout != self.layout || state.x.len() != self.layout.len() {
            return Err(Error::Parameter("state layout does not match the case".into()));
        }
        Ok(())
    }
}

/// Flat start for a per-unit case.
pub fn flat_start(case: &NetworkCase) -> Result<SolverState> {
    Ok(SolverModel::build(case, crate::freq::DEFAULT_SMOOTHING_HZ)?.flat_start())
}
