//! Grid description shared by every other module.
//!
//! A [`NetworkCase`] is built in physical units (MW, MVAr, MW/Hz) and converted
//! once with [`to_per_unit`] before it is handed to the solver. The `per_unit`
//! flag makes the conversion idempotent.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BusId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    Slack,
    PV,
    PQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Status {
    #[default]
    InService,
    Out,
}

impl Status {
    pub fn in_service(self) -> bool {
        self == Status::InService
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: BusId,
    pub base_kv: f64,
    pub kind: BusKind,
    pub area_id: u32,
    /// Voltage magnitude setpoint in pu, required for Slack and PV buses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_set: Option<f64>,
    /// Slack angle reference in radians; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_set: Option<f64>,
}

/// Pi-equivalent branch with an off-nominal tap on the from side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub id: u32,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b_sh: f64,
    #[serde(default = "unit_tap")]
    pub tap: f64,
    #[serde(default)]
    pub status: Status,
}

fn unit_tap() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: u32,
    pub bus_id: BusId,
    pub p_set: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Primary response P_R/R, MW/Hz (pu/Hz once converted).
    #[serde(default)]
    pub droop_gain: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub agc: bool,
    #[serde(default)]
    pub status: Status,
}

/// ZIP fractions `[a_Z, a_I, a_P]`.
pub type ZipFractions = [f64; 3];

pub const PURE_PQ: ZipFractions = [0.0, 0.0, 1.0];

fn pure_pq() -> ZipFractions {
    PURE_PQ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub id: u32,
    pub bus_id: BusId,
    pub p0: f64,
    #[serde(default)]
    pub q0: f64,
    #[serde(default = "pure_pq")]
    pub zip_p: ZipFractions,
    #[serde(default = "pure_pq")]
    pub zip_q: ZipFractions,
    /// Fractional active-power sensitivity, 1/Hz.
    #[serde(default)]
    pub k_pf: f64,
    #[serde(default)]
    pub k_qf: f64,
    #[serde(default)]
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub id: u32,
    /// Frequency bias magnitude in MW per 0.1 Hz.
    #[serde(default)]
    pub beta: f64,
    /// Scheduled net export, MW.
    #[serde(default)]
    pub scheduled_interchange: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub mva_base: f64,
    pub f_nominal: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub areas: Vec<Area>,
    pub per_unit: bool,
}

impl NetworkCase {
    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn generator(&self, id: u32) -> Option<&Generator> {
        self.generators.iter().find(|g| g.id == id)
    }

    pub fn area(&self, id: u32) -> Option<&Area> {
        self.areas.iter().find(|a| a.id == id)
    }

    pub fn slack_bus(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.kind == BusKind::Slack)
    }

    /// True when some device couples active power to frequency.
    pub fn has_frequency_coupling(&self) -> bool {
        self.generators
            .iter()
            .any(|g| g.status.in_service() && g.droop_gain > 0.0)
            || self
                .loads
                .iter()
                .any(|l| l.status.in_service() && (l.k_pf != 0.0 || l.k_qf != 0.0))
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BadBase(String),
    NoSlack,
    MultipleSlack(Vec<BusId>),
    SlackWithoutGenerator(BusId),
    Duplicate { kind: &'static str, id: u32 },
    Dangling { kind: &'static str, id: u32, bus: BusId },
    UnknownArea { bus: BusId, area: u32 },
    Bus { id: BusId, reason: String },
    Branch { id: u32, reason: String },
    Generator { id: u32, reason: String },
    Load { id: u32, reason: String },
    Area { id: u32, reason: String },
    Islanded(Vec<BusId>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadBase(msg) => write!(f, "system base: {msg}"),
            Violation::NoSlack => write!(f, "no slack bus"),
            Violation::MultipleSlack(ids) => write!(f, "more than one slack bus: {ids:?}"),
            Violation::SlackWithoutGenerator(id) => {
                write!(f, "slack bus {id} has no in-service generator")
            }
            Violation::Duplicate { kind, id } => write!(f, "duplicate {kind} id {id}"),
            Violation::Dangling { kind, id, bus } => {
                write!(f, "dangling reference: {kind} {id} refers to missing bus {bus}")
            }
            Violation::UnknownArea { bus, area } => {
                write!(f, "dangling reference: bus {bus} refers to missing area {area}")
            }
            Violation::Bus { id, reason } => write!(f, "bus {id}: {reason}"),
            Violation::Branch { id, reason } => write!(f, "branch {id}: {reason}"),
            Violation::Generator { id, reason } => write!(f, "generator {id}: {reason}"),
            Violation::Load { id, reason } => write!(f, "load {id}: {reason}"),
            Violation::Area { id, reason } => write!(f, "area {id}: {reason}"),
            Violation::Islanded(ids) => {
                write!(f, "islanded: buses {ids:?} are not connected to the slack")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

fn check_duplicates<I: Iterator<Item = u32>>(
    kind: &'static str,
    ids: I,
    out: &mut Vec<Violation>,
) {
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) && reported.insert(id) {
            out.push(Violation::Duplicate { kind, id });
        }
    }
}

/// Checks every structural invariant and reports all violations found.
pub fn validate(case: &NetworkCase) -> ValidationReport {
    let mut out = Vec::new();

    if !(case.mva_base.is_finite() && case.mva_base > 0.0) {
        out.push(Violation::BadBase(format!("mva_base must be positive, got {}", case.mva_base)));
    }
    if !(case.f_nominal.is_finite() && case.f_nominal > 0.0) {
        out.push(Violation::BadBase(format!(
            "f_nominal must be positive, got {}",
            case.f_nominal
        )));
    }

    check_duplicates("bus", case.buses.iter().map(|b| b.id), &mut out);
    check_duplicates("branch", case.branches.iter().map(|b| b.id), &mut out);
    check_duplicates("generator", case.generators.iter().map(|g| g.id), &mut out);
    check_duplicates("load", case.loads.iter().map(|l| l.id), &mut out);
    check_duplicates("area", case.areas.iter().map(|a| a.id), &mut out);

    let bus_ids: BTreeSet<BusId> = case.buses.iter().map(|b| b.id).collect();
    let area_ids: BTreeSet<u32> = case.areas.iter().map(|a| a.id).collect();

    let slacks: Vec<BusId> = case
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Slack)
        .map(|b| b.id)
        .collect();
    match slacks.len() {
        0 => out.push(Violation::NoSlack),
        1 => {
            let has_gen = case
                .generators
                .iter()
                .any(|g| g.bus_id == slacks[0] && g.status.in_service());
            if !has_gen {
                out.push(Violation::SlackWithoutGenerator(slacks[0]));
            }
        }
        _ => out.push(Violation::MultipleSlack(slacks)),
    }

    for b in &case.buses {
        if !(b.base_kv.is_finite() && b.base_kv > 0.0) {
            out.push(Violation::Bus { id: b.id, reason: format!("base_kv must be positive, got {}", b.base_kv) });
        }
        if !area_ids.contains(&b.area_id) {
            out.push(Violation::UnknownArea { bus: b.id, area: b.area_id });
        }
        match (b.kind, b.v_set) {
            (BusKind::Slack | BusKind::PV, None) => out.push(Violation::Bus {
                id: b.id,
                reason: "v_set is required for Slack and PV buses".into(),
            }),
            (_, Some(v)) if !(v.is_finite() && v > 0.0) => out.push(Violation::Bus {
                id: b.id,
                reason: format!("v_set must be positive, got {v}"),
            }),
            _ => {}
        }
        if let Some(a) = b.angle_set {
            if !a.is_finite() {
                out.push(Violation::Bus { id: b.id, reason: "angle_set is not finite".into() });
            }
        }
    }

    for br in &case.branches {
        for end in [br.from_bus, br.to_bus] {
            if !bus_ids.contains(&end) {
                out.push(Violation::Dangling { kind: "branch", id: br.id, bus: end });
            }
        }
        if br.from_bus == br.to_bus {
            out.push(Violation::Branch { id: br.id, reason: "from_bus equals to_bus".into() });
        }
        if !finite(&[br.r, br.x, br.b_sh, br.tap]) {
            out.push(Violation::Branch { id: br.id, reason: "non-finite parameter".into() });
        } else {
            if br.r == 0.0 && br.x == 0.0 {
                out.push(Violation::Branch { id: br.id, reason: "zero series impedance".into() });
            }
            if br.tap <= 0.0 {
                out.push(Violation::Branch { id: br.id, reason: format!("tap must be positive, got {}", br.tap) });
            }
        }
    }

    for g in &case.generators {
        if !bus_ids.contains(&g.bus_id) {
            out.push(Violation::Dangling { kind: "generator", id: g.id, bus: g.bus_id });
        }
        if !finite(&[g.p_set, g.p_min, g.p_max, g.droop_gain, g.kappa]) {
            out.push(Violation::Generator { id: g.id, reason: "non-finite parameter".into() });
            continue;
        }
        if !(g.p_min <= g.p_set && g.p_set <= g.p_max) {
            out.push(Violation::Generator {
                id: g.id,
                reason: format!("requires p_min <= p_set <= p_max, got {} <= {} <= {}", g.p_min, g.p_set, g.p_max),
            });
        }
        if g.droop_gain < 0.0 {
            out.push(Violation::Generator { id: g.id, reason: "droop_gain must be nonnegative".into() });
        }
        if !(0.0..=1.0).contains(&g.kappa) {
            out.push(Violation::Generator { id: g.id, reason: format!("kappa must lie in [0, 1], got {}", g.kappa) });
        }
        if g.agc && g.kappa <= 0.0 {
            out.push(Violation::Generator { id: g.id, reason: "agc generator needs kappa > 0".into() });
        }
    }

    for l in &case.loads {
        if !bus_ids.contains(&l.bus_id) {
            out.push(Violation::Dangling { kind: "load", id: l.id, bus: l.bus_id });
        }
        if !finite(&[l.p0, l.q0, l.k_pf, l.k_qf]) || !finite(&l.zip_p) || !finite(&l.zip_q) {
            out.push(Violation::Load { id: l.id, reason: "non-finite parameter".into() });
            continue;
        }
        for (name, zip) in [("zip_p", l.zip_p), ("zip_q", l.zip_q)] {
            let sum: f64 = zip.iter().sum();
            if zip.iter().any(|&a| a < 0.0) || (sum - 1.0).abs() > 1e-9 {
                out.push(Violation::Load {
                    id: l.id,
                    reason: format!("{name} fractions must be nonnegative and sum to 1, got {zip:?}"),
                });
            }
        }
    }

    for a in &case.areas {
        if !(a.beta.is_finite() && a.beta >= 0.0) {
            out.push(Violation::Area { id: a.id, reason: format!("beta must be nonnegative, got {}", a.beta) });
        }
        if !a.scheduled_interchange.is_finite() {
            out.push(Violation::Area { id: a.id, reason: "scheduled_interchange is not finite".into() });
        }
    }

    let islanded = unreachable_buses(case);
    if !islanded.is_empty() && !case.buses.is_empty() {
        out.push(Violation::Islanded(islanded));
    }

    ValidationReport { violations: out }
}

/// Buses not reachable from the slack (or from the first bus when there is
/// no slack) over in-service branches.
pub fn unreachable_buses(case: &NetworkCase) -> Vec<BusId> {
    let Some(root) = case.slack_bus().or(case.buses.first()).map(|b| b.id) else {
        return Vec::new();
    };
    let mut adjacency: HashMap<BusId, Vec<BusId>> = HashMap::new();
    for br in case.branches.iter().filter(|b| b.status.in_service()) {
        adjacency.entry(br.from_bus).or_default().push(br.to_bus);
        adjacency.entry(br.to_bus).or_default().push(br.from_bus);
    }
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(b) = queue.pop_front() {
        for &n in adjacency.get(&b).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    let mut missing: Vec<BusId> = case
        .buses
        .iter()
        .map(|b| b.id)
        .filter(|id| !seen.contains(id))
        .collect();
    missing.sort_unstable();
    missing.dedup();
    missing
}

fn scale_case(case: &NetworkCase, k: f64) -> NetworkCase {
    let mut out = case.clone();
    for g in &mut out.generators {
        g.p_set *= k;
        g.p_min *= k;
        g.p_max *= k;
        g.droop_gain *= k;
    }
    for l in &mut out.loads {
        l.p0 *= k;
        l.q0 *= k;
    }
    for a in &mut out.areas {
        a.beta *= k;
        a.scheduled_interchange *= k;
    }
    out
}

/// Divides every MW/MVAr quantity by the system base. No-op on a case that
/// is already in per-unit.
pub fn to_per_unit(case: &NetworkCase) -> Result<NetworkCase> {
    if !(case.mva_base.is_finite() && case.mva_base > 0.0) {
        return Err(Error::Units(format!("mva_base must be positive, got {}", case.mva_base)));
    }
    if case.per_unit {
        return Ok(case.clone());
    }
    let mut out = scale_case(case, 1.0 / case.mva_base);
    out.per_unit = true;
    Ok(out)
}

/// Inverse of [`to_per_unit`].
pub fn to_physical(case: &NetworkCase) -> Result<NetworkCase> {
    if !(case.mva_base.is_finite() && case.mva_base > 0.0) {
        return Err(Error::Units(format!("mva_base must be positive, got {}", case.mva_base)));
    }
    if !case.per_unit {
        return Ok(case.clone());
    }
    let mut out = scale_case(case, case.mva_base);
    out.per_unit = false;
    Ok(out)
}

/// Area membership lookup.
pub fn area_of_bus(case: &NetworkCase) -> BTreeMap<BusId, u32> {
    case.buses.iter().map(|b| (b.id, b.area_id)).collect()
}


#[cfg(test)]
mod tests {
    use super::fixtures::two_bus;
    use super::*;

    #[test]
    fn two_bus_is_clean() {
        let report = validate(&two_bus());
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn empty_case_has_no_slack() {
        let mut case = two_bus();
        case.buses.clear();
        case.branches.clear();
        case.generators.clear();
        case.loads.clear();
        assert!(validate(&case).contains("no slack bus"));
    }

    #[test]
    fn dangling_branch_is_reported() {
        let mut case = two_bus();
        case.branches[0].to_bus = 99;
        let report = validate(&case);
        assert!(report.violations.contains(&Violation::Dangling { kind: "branch", id: 1, bus: 99 }));
        assert!(report.contains("dangling"));
    }

    #[test]
    fn island_and_duplicates() {
        let mut case = two_bus();
        case.branches[0].status = Status::Out;
        case.areas.push(Area { id: 1, beta: 0.0, scheduled_interchange: 0.0 });
        let report = validate(&case);
        assert!(report.violations.contains(&Violation::Islanded(vec![2])));
        assert!(report.violations.contains(&Violation::Duplicate { kind: "area", id: 1 }));
    }

    #[test]
    fn generator_and_load_invariants() {
        let mut case = two_bus();
        case.generators[0].p_set = 2000.0;
        case.generators[0].kappa = 0.0;
        case.loads[0].zip_p = [0.5, 0.5, 0.5];
        let report = validate(&case);
        assert!(report.contains("p_min <= p_set <= p_max"));
        assert!(report.contains("kappa > 0"));
        assert!(report.contains("zip_p"));
    }

    #[test]
    fn slack_without_generator() {
        let mut case = two_bus();
        case.generators[0].status = Status::Out;
        assert!(validate(&case).contains("no in-service generator"));
    }

    #[test]
    fn non_finite_input_still_reports() {
        let mut case = two_bus();
        case.branches[0].x = f64::NAN;
        case.generators[0].p_max = f64::INFINITY;
        case.mva_base = f64::NAN;
        let report = validate(&case);
        assert!(report.violations.len() >= 3);
    }

    #[test]
    fn per_unit_conversion() {
        let case = two_bus();
        let pu = to_per_unit(&case).unwrap();
        assert_eq!(pu.generators[0].p_set, 1.0);
        assert_eq!(pu.generators[0].droop_gain, 1.0);
        assert_eq!(pu.areas[0].beta, 0.1);
        assert_eq!(to_per_unit(&pu).unwrap(), pu);

        let mut g101 = case.clone();
        g101.generators[0].droop_gain = 950.0;
        assert_eq!(to_per_unit(&g101).unwrap().generators[0].droop_gain, 9.5);
    }

    #[test]
    fn per_unit_rejects_bad_base() {
        let mut case = two_bus();
        case.mva_base = 0.0;
        assert!(matches!(to_per_unit(&case), Err(Error::Units(_))));
        case.mva_base = -5.0;
        assert!(to_per_unit(&case).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn per_unit_round_trip(base in 1.0f64..5000.0, p in -1e4f64..1e4, g in 0.0f64..5e3, q in -1e3f64..1e3) {
                let mut case = two_bus();
                case.mva_base = base;
                case.generators[0].p_set = p;
                case.generators[0].droop_gain = g;
                case.loads[0].q0 = q;
                let back = to_physical(&to_per_unit(&case).unwrap()).unwrap();
                let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                prop_assert!(rel(back.generators[0].p_set, p));
                prop_assert!(rel(back.generators[0].droop_gain, g));
                prop_assert!(rel(back.loads[0].q0, q));
                prop_assert!(!back.per_unit);
            }
        }
    }
}
