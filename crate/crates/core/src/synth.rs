//! Deterministic synthetic meshed grids.
//!
//! Buses sit on a near-square lattice with nearest-neighbour lines plus a few
//! short random chords. Generators are spread every eighth bus so that flows
//! stay local, which keeps flat-start convergence reliable at any size.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::network::{to_per_unit, Area, Branch, Bus, BusKind, Generator, Load, NetworkCase, Status, PURE_PQ};
use crate::orchestrator::{rebalance_slack, run_base};
use crate::solver::SolverOptions;

const GEN_SPACING: usize = 8;
/// Governor droop, fraction of rated output per fraction of nominal frequency.
const DROOP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_bus: usize,
    pub seed: u64,
    /// Number of control areas; 0 picks 2 below 100 buses and 4 otherwise.
    pub n_areas: usize,
    /// Fraction of extra chord lines relative to the bus count.
    pub chord_ratio: f64,
}

impl SynthParams {
    pub fn new(n_bus: usize, seed: u64) -> Self {
        SynthParams { n_bus, seed, n_areas: 0, chord_ratio: 0.1 }
    }
}

/// Builds the raw grid in physical units. Scheduled interchanges are zero;
/// see [`synthetic_case`] for a balanced, scheduled case.
pub fn synthetic_grid(p: &SynthParams) -> NetworkCase {
    let n = p.n_bus.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let side = (n as f64).sqrt().ceil() as usize;
    let pos = |k: usize| (k % side, k / side);
    let n_areas = match p.n_areas {
        0 if n < 100 => 2,
        0 => 4,
        a => a,
    };
    let area_of = |k: usize| {
        let (x, y) = pos(k);
        let right = (2 * x >= side) as usize;
        let lower = (2 * y >= side.max(1)) as usize;
        let a = if n_areas <= 2 { right } else { right + 2 * lower };
        (a % n_areas) as u32 + 1
    };

    let centre = {
        let c = (side / 2) * side + side / 2;
        let c = c.min(n - 1);
        c - c % GEN_SPACING
    };
    let is_gen = |k: usize| k % GEN_SPACING == 0;

    let mut edges = BTreeSet::new();
    for k in 0..n {
        let (x, _) = pos(k);
        if x + 1 < side && k + 1 < n {
            edges.insert((k, k + 1));
        }
        if k + side < n {
            edges.insert((k, k + side));
        }
    }
    let n_chords = (p.chord_ratio * n as f64).round() as usize;
    let mut attempts = 0;
    let mut added = 0;
    while added < n_chords && attempts < 20 * n_chords + 20 {
        attempts += 1;
        let a = rng.random_range(0..n);
        let (ax, ay) = pos(a);
        let dx = rng.random_range(-3i64..=3);
        let dy = rng.random_range(-3i64..=3);
        let (bx, by) = (ax as i64 + dx, ay as i64 + dy);
        if bx < 0 || by < 0 || bx >= side as i64 {
            continue;
        }
        let b = by as usize * side + bx as usize;
        if b >= n || b == a {
            continue;
        }
        if edges.insert((a.min(b), a.max(b))) {
            added += 1;
        }
    }

    let branches = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Branch {
            id: i as u32 + 1,
            from_bus: a as u32 + 1,
            to_bus: b as u32 + 1,
            r: rng.random_range(0.002..0.006),
            x: rng.random_range(0.02..0.05),
            b_sh: rng.random_range(0.01..0.03),
            tap: 1.0,
            status: Status::InService,
        })
        .collect();

    let mut loads = Vec::new();
    for k in (0..n).filter(|&k| !is_gen(k)) {
        let pl: f64 = rng.random_range(5.0..20.0);
        loads.push(Load {
            id: loads.len() as u32 + 1,
            bus_id: k as u32 + 1,
            p0: pl,
            q0: 0.3 * pl,
            zip_p: PURE_PQ,
            zip_q: PURE_PQ,
            k_pf: 0.0,
            k_qf: 0.0,
            status: Status::InService,
        });
    }
    let total_load: f64 = loads.iter().map(|l| l.p0).sum();
    let gen_buses: Vec<usize> = (0..n).filter(|&k| is_gen(k)).collect();
    let share = total_load / gen_buses.len() as f64;

    let mut buses = Vec::with_capacity(n);
    for k in 0..n {
        let kind = if k == centre {
            BusKind::Slack
        } else if is_gen(k) {
            BusKind::PV
        } else {
            BusKind::PQ
        };
        let v_set = match kind {
            BusKind::Slack => Some(1.02),
            BusKind::PV => Some(rng.random_range(1.0..1.03)),
            BusKind::PQ => None,
        };
        buses.push(Bus {
            id: k as u32 + 1,
            base_kv: 230.0,
            kind,
            area_id: area_of(k),
            v_set,
            angle_set: (kind == BusKind::Slack).then_some(0.0),
        });
    }

    let mut generators = Vec::new();
    for &k in &gen_buses {
        let p_set = if k == centre { share } else { share * rng.random_range(0.8..1.2) };
        let headroom = if k == centre { 3.0 } else { rng.random_range(1.5..1.6) };
        let p_max = p_set * headroom;
        generators.push(Generator {
            id: generators.len() as u32 + 1,
            bus_id: k as u32 + 1,
            p_set,
            p_min: 0.0,
            p_max,
            droop_gain: p_max / (DROOP * 60.0),
            kappa: 0.0,
            agc: true,
            status: Status::InService,
        });
    }

    let mut areas: Vec<Area> = (1..=n_areas as u32)
        .map(|id| Area { id, beta: 0.0, scheduled_interchange: 0.0 })
        .collect();
    for a in &mut areas {
        let members: Vec<usize> = generators
            .iter()
            .enumerate()
            .filter(|(_, g)| buses[g.bus_id as usize - 1].area_id == a.id)
            .map(|(i, _)| i)
            .collect();
        let droop: f64 = members.iter().map(|&i| generators[i].droop_gain).sum();
        a.beta = droop / 10.0;
        for &i in &members {
            generators[i].kappa = 1.0 / members.len() as f64;
        }
    }
    areas.retain(|a| buses.iter().any(|b| b.area_id == a.id));

    NetworkCase {
        mva_base: 100.0,
        f_nominal: 60.0,
        buses,
        branches,
        generators,
        loads,
        areas,
        per_unit: false,
    }
}

/// Synthetic grid balanced at nominal frequency: the slack setpoint is moved
/// to its base-case output and each area's schedule is set to its base-case
/// export, so the pre-disturbance ACE is zero everywhere.
pub fn synthetic_case(p: &SynthParams, opts: &SolverOptions) -> Result<NetworkCase> {
    let raw = to_per_unit(&synthetic_grid(p))?;
    let base = run_base(&raw, None, opts)?;
    let (mut case, _) = rebalance_slack(&raw, &base);
    for a in &mut case.areas {
        a.scheduled_interchange = base.area_export.get(&a.id).copied().unwrap_or(0.0);
    }
    crate::network::to_physical(&case)
}

/// Largest in-service generator outside the slack bus, by setpoint.
pub fn largest_non_slack_generator(case: &NetworkCase) -> Option<u32> {
    let slack = case.slack_bus()?.id;
    case.generators
        .iter()
        .filter(|g| g.bus_id != slack && g.status.in_service())
        .max_by(|a, b| a.p_set.total_cmp(&b.p_set))
        .map(|g| g.id)
}
