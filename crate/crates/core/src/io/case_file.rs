//! Native JSON case format, physical units.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use crate::error::{Error, Result};
use crate::network::{to_per_unit, to_physical, validate, Area, Branch, Bus, Generator, Load, NetworkCase};

pub const CASE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub version: u32,
    pub mva_base: f64,
    pub f_nominal: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub areas: Vec<Area>,
}

impl CaseFile {
    pub fn from_case(case: &NetworkCase) -> Result<Self> {
        let c = to_physical(case)?;
        Ok(CaseFile {
            version: CASE_VERSION,
            mva_base: c.mva_base,
            f_nominal: c.f_nominal,
            buses: c.buses,
            branches: c.branches,
            generators: c.generators,
            loads: c.loads,
            areas: c.areas,
        })
    }

    pub fn into_case(self) -> NetworkCase {
        NetworkCase {
            mva_base: self.mva_base,
            f_nominal: self.f_nominal,
            buses: self.buses,
            branches: self.branches,
            generators: self.generators,
            loads: self.loads,
            areas: self.areas,
            per_unit: false,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Deserializes JSON, reporting syntax errors by line/column and data errors
/// by JSON pointer.
pub(crate) fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        let inner = e.into_inner();
        json_error(inner, pointer)
    })?;
    Ok(value)
}

fn json_error(e: serde_json::Error, pointer: String) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => {
            Error::Malformed { line: e.line(), column: e.column(), message: e.to_string() }
        }
        Category::Data => Error::Schema { pointer, message: e.to_string() },
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses a case document without validating or converting it.
pub fn parse_case_document(text: &str) -> Result<NetworkCase> {
    if text.trim().is_empty() {
        return Err(Error::Malformed { line: 1, column: 0, message: "empty input".into() });
    }
    let file: CaseFile = from_json(text)?;
    if file.version != CASE_VERSION {
        return Err(Error::Schema {
            pointer: "/version".into(),
            message: format!("unsupported version {}, expected {CASE_VERSION}", file.version),
        });
    }
    check_unique_ids(&file)?;
    Ok(file.into_case())
}

fn check_unique_ids(file: &CaseFile) -> Result<()> {
    fn unique(kind: &str, key: &str, ids: impl Iterator<Item = u32>) -> Result<()> {
        let mut seen = HashMap::new();
        for (i, id) in ids.enumerate() {
            if seen.insert(id, i).is_some() {
                return Err(Error::Schema {
                    pointer: format!("/{key}/{i}/id"),
                    message: format!("duplicate {kind} id {id}"),
                });
            }
        }
        Ok(())
    }
    unique("bus", "buses", file.buses.iter().map(|b| b.id))?;
    unique("branch", "branches", file.branches.iter().map(|b| b.id))?;
    unique("generator", "generators", file.generators.iter().map(|g| g.id))?;
    unique("load", "loads", file.loads.iter().map(|l| l.id))?;
    unique("area", "areas", file.areas.iter().map(|a| a.id))
}

/// Parses, validates and converts to per-unit.
pub fn parse_case_str(text: &str) -> Result<NetworkCase> {
    let case = parse_case_document(text)?;
    validate(&case).into_result()?;
    to_per_unit(&case)
}

pub fn parse_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    parse_case_str(&read_text(path.as_ref())?)
}

/// Reads a case file as written, physical units, unvalidated.
pub fn read_case_document(path: impl AsRef<Path>) -> Result<NetworkCase> {
    parse_case_document(&read_text(path.as_ref())?)
}

/// Writes a case (either unit system) as a physical-unit document.
pub fn case_to_json(case: &NetworkCase) -> Result<String> {
    let file = CaseFile::from_case(case)?;
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parameter(e.to_string()))
}

pub fn write_case(case: &NetworkCase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, case_to_json(case)?)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}
