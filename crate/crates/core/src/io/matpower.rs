//! MATPOWER case import.
//!
//! Only the power-flow tables (`bus`, `gen`, `branch`) and `baseMVA` are read.
//! Frequency parameters have no MATPOWER columns; they come from an optional
//! JSON sidecar and default to zero otherwise, in which case the solver runs a
//! conventional power flow with Δf held at zero.
//!
//! Ids: buses keep `bus_i`; generators and branches are numbered by their row
//! (1-based); loads are numbered in creation order, demand loads first, then
//! shunt loads.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::case_file::{from_json, read_text};
use crate::network::{
    to_per_unit, validate, Area, Branch, Bus, BusKind, Generator, Load, NetworkCase, Status,
    ZipFractions, PURE_PQ,
};

/// Informational tables that carry nothing the power flow needs.
const IGNORED: &[&str] = &["version", "gencost", "bus_name", "gentype", "genfuel"];

#[derive(Debug, Clone)]
enum Value {
    Scalar(f64),
    Text,
    Matrix(Vec<Vec<f64>>),
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_number(tok: &str) -> Result<f64> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse()
            .map_err(|_| Error::Parameter(format!("matpower: bad number {tok:?}"))),
    }
}

fn parse_rows(body: &str) -> Result<Vec<Vec<f64>>> {
    body.split([';', '\n'])
        .map(|row| row.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()))
        .map(|toks| toks.map(parse_number).collect::<Result<Vec<f64>>>())
        .filter(|r| !matches!(r, Ok(v) if v.is_empty()))
        .collect()
}

/// Splits the file into `mpc.<name> = <value>` assignments.
fn parse_assignments(text: &str) -> Result<BTreeMap<String, Value>> {
    let cleaned: Vec<&str> = text.lines().map(strip_comment).collect();
    let joined = cleaned.join("\n");
    let mut out = BTreeMap::new();
    let mut rest = joined.as_str();
    while let Some(pos) = rest.find("mpc.") {
        rest = &rest[pos + 4..];
        let eq = rest
            .find('=')
            .ok_or_else(|| Error::Parameter("matpower: assignment without '='".into()))?;
        let name = rest[..eq].trim().to_string();
        let rhs = rest[eq + 1..].trim_start();
        let (value, consumed) = match rhs.chars().next() {
            Some('[') => {
                let end = rhs
                    .find(']')
                    .ok_or_else(|| Error::Parameter(format!("matpower: unterminated matrix {name}")))?;
                (Value::Matrix(parse_rows(&rhs[1..end])?), end + 1)
            }
            Some('{') => {
                let end = rhs
                    .find('}')
                    .ok_or_else(|| Error::Parameter(format!("matpower: unterminated cell {name}")))?;
                (Value::Text, end + 1)
            }
            Some('\'') => {
                let end = rhs[1..].find('\'').map(|e| e + 2).unwrap_or(rhs.len());
                (Value::Text, end)
            }
            _ => {
                let end = rhs.find([';', '\n']).unwrap_or(rhs.len());
                (Value::Scalar(parse_number(rhs[..end].trim())?), end)
            }
        };
        out.insert(name, value);
        rest = &rhs[consumed..];
    }
    Ok(out)
}

fn matrix<'a>(values: &'a BTreeMap<String, Value>, name: &str, min_cols: usize) -> Result<&'a [Vec<f64>]> {
    match values.get(name) {
        Some(Value::Matrix(rows)) => {
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() < min_cols) {
                return Err(Error::Parameter(format!(
                    "matpower: {name} row {} has {} columns, need {min_cols}",
                    i + 1,
                    r.len()
                )));
            }
            Ok(rows)
        }
        _ => Err(Error::Parameter(format!("matpower: missing table mpc.{name}"))),
    }
}

/// Builds a physical-unit case from MATPOWER text.
pub fn parse_matpower(text: &str) -> Result<NetworkCase> {
    let values = parse_assignments(text)?;
    let mut unsupported: Vec<String> = values
        .keys()
        .filter(|k| !matches!(k.as_str(), "baseMVA" | "bus" | "gen" | "branch"))
        .filter(|k| !IGNORED.contains(&k.as_str()))
        .map(|k| format!("mpc.{k}"))
        .collect();

    let mva_base = match values.get("baseMVA") {
        Some(Value::Scalar(v)) => *v,
        _ => return Err(Error::Parameter("matpower: missing mpc.baseMVA".into())),
    };
    let bus_rows = matrix(&values, "bus", 13)?;
    let gen_rows = matrix(&values, "gen", 10)?;
    let branch_rows = matrix(&values, "branch", 11)?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut loads = Vec::new();
    let mut shunts = Vec::new();
    for r in bus_rows {
        let id = r[0] as u32;
        let kind = match r[1] as i64 {
            3 => BusKind::Slack,
            2 => BusKind::PV,
            1 => BusKind::PQ,
            t => {
                unsupported.push(format!("bus {id}: type {t}"));
                BusKind::PQ
            }
        };
        let regulated = kind != BusKind::PQ;
        buses.push(Bus {
            id,
            base_kv: r[9],
            kind,
            area_id: r[6] as u32,
            v_set: regulated.then_some(r[7]),
            angle_set: (kind == BusKind::Slack).then_some(r[8].to_radians()),
        });
        if r[2] != 0.0 || r[3] != 0.0 {
            loads.push(load(id, r[2], r[3], PURE_PQ));
        }
        if r[4] != 0.0 || r[5] != 0.0 {
            shunts.push(load(id, r[4], -r[5], [1.0, 0.0, 0.0]));
        }
    }
    loads.extend(shunts);
    for (i, l) in loads.iter_mut().enumerate() {
        l.id = i as u32 + 1;
    }

    let mut generators = Vec::with_capacity(gen_rows.len());
    let mut vg_seen = BTreeSet::new();
    for (i, r) in gen_rows.iter().enumerate() {
        let bus_id = r[0] as u32;
        let status = if r[7] > 0.0 { Status::InService } else { Status::Out };
        if status.in_service() && vg_seen.insert(bus_id) {
            if let Some(b) = buses.iter_mut().find(|b| b.id == bus_id && b.v_set.is_some()) {
                b.v_set = Some(r[5]);
            }
        }
        generators.push(Generator {
            id: i as u32 + 1,
            bus_id,
            p_set: r[1],
            p_min: r[9],
            p_max: r[8],
            droop_gain: 0.0,
            kappa: 0.0,
            agc: false,
            status,
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (i, r) in branch_rows.iter().enumerate() {
        let id = i as u32 + 1;
        if r[9] != 0.0 {
            unsupported.push(format!(
                "branch {id} ({}-{}): phase shift {} deg",
                r[0] as u32, r[1] as u32, r[9]
            ));
        }
        branches.push(Branch {
            id,
            from_bus: r[0] as u32,
            to_bus: r[1] as u32,
            r: r[2],
            x: r[3],
            b_sh: r[4],
            tap: if r[8] == 0.0 { 1.0 } else { r[8] },
            status: if r[10] > 0.0 { Status::InService } else { Status::Out },
        });
    }
    if !unsupported.is_empty() {
        return Err(Error::Unsupported(unsupported));
    }

    let area_ids: BTreeSet<u32> = buses.iter().map(|b| b.area_id).collect();
    let areas = area_ids
        .into_iter()
        .map(|id| Area { id, beta: 0.0, scheduled_interchange: 0.0 })
        .collect();

    Ok(NetworkCase {
        mva_base,
        f_nominal: 60.0,
        buses,
        branches,
        generators,
        loads,
        areas,
        per_unit: false,
    })
}

fn load(bus_id: u32, p0: f64, q0: f64, zip: ZipFractions) -> Load {
    Load { id: 0, bus_id, p0, q0, zip_p: zip, zip_q: zip, k_pf: 0.0, k_qf: 0.0, status: Status::InService }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub droop_gain: Option<f64>,
    pub kappa: Option<f64>,
    pub agc: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorOverride {
    pub id: u32,
    pub droop_gain: Option<f64>,
    pub kappa: Option<f64>,
    pub agc: Option<bool>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadParams {
    pub zip_p: Option<ZipFractions>,
    pub zip_q: Option<ZipFractions>,
    pub k_pf: Option<f64>,
    pub k_qf: Option<f64>,
}

/// Frequency data layered over an imported case. Units as in the native case
/// format (MW, MW/Hz, MW per 0.1 Hz).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub f_nominal: Option<f64>,
    #[serde(default)]
    pub generator_defaults: GeneratorParams,
    #[serde(default)]
    pub generators: Vec<GeneratorOverride>,
    #[serde(default)]
    pub load_defaults: LoadParams,
    /// Replaces areas by id; new ids are appended.
    #[serde(default)]
    pub areas: Vec<Area>,
}

fn apply_params(g: &mut Generator, p: &GeneratorParams) {
    if let Some(v) = p.droop_gain {
        g.droop_gain = v;
    }
    if let Some(v) = p.kappa {
        g.kappa = v;
    }
    if let Some(v) = p.agc {
        g.agc = v;
    }
}

pub fn apply_sidecar(case: &mut NetworkCase, sidecar: &Sidecar) -> Result<()> {
    if case.per_unit {
        return Err(Error::Units("sidecar applies to physical-unit cases".into()));
    }
    if let Some(f) = sidecar.f_nominal {
        case.f_nominal = f;
    }
    for g in &mut case.generators {
        apply_params(g, &sidecar.generator_defaults);
    }
    for o in &sidecar.generators {
        let g = case
            .generators
            .iter_mut()
            .find(|g| g.id == o.id)
            .ok_or(Error::MissingId { kind: "generator", id: o.id })?;
        let params = GeneratorParams { droop_gain: o.droop_gain, kappa: o.kappa, agc: o.agc };
        apply_params(g, &params);
        if let Some(v) = o.p_min {
            g.p_min = v;
        }
        if let Some(v) = o.p_max {
            g.p_max = v;
        }
    }
    let lp = &sidecar.load_defaults;
    for l in &mut case.loads {
        if let Some(z) = lp.zip_p {
            l.zip_p = z;
        }
        if let Some(z) = lp.zip_q {
            l.zip_q = z;
        }
        if let Some(k) = lp.k_pf {
            l.k_pf = k;
        }
        if let Some(k) = lp.k_qf {
            l.k_qf = k;
        }
    }
    for a in &sidecar.areas {
        match case.areas.iter_mut().find(|x| x.id == a.id) {
            Some(x) => *x = a.clone(),
            None => case.areas.push(a.clone()),
        }
    }
    Ok(())
}

/// Parses MATPOWER text plus an optional sidecar, then validates and converts
/// to per-unit.
pub fn import_matpower_str(text: &str, sidecar: Option<&str>) -> Result<NetworkCase> {
    let mut case = parse_matpower(text)?;
    if let Some(s) = sidecar {
        let sc: Sidecar = from_json(s)?;
        apply_sidecar(&mut case, &sc)?;
    }
    validate(&case).into_result()?;
    to_per_unit(&case)
}

pub fn import_matpower(path: impl AsRef<Path>, sidecar: Option<&Path>) -> Result<NetworkCase> {
    let text = read_text(path.as_ref())?;
    let side = sidecar.map(read_text).transpose()?;
    import_matpower_str(&text, side.as_deref())
}
