//! Results files: JSON with full-precision numbers and a CSV generator table.
//!
//! Powers are reported in MW / MVAr, frequency in Hz, angles in degrees.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::orchestrator::StageResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRecord {
    pub id: u32,
    pub p_set: f64,
    pub dp_primary: f64,
    pub dp_secondary: f64,
    pub p_total: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusRecord {
    pub id: u32,
    pub v_mag: f64,
    pub v_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub label: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub df_hz: f64,
    /// Keyed by area id.
    pub ace_by_area_mw: BTreeMap<String, f64>,
    pub generators: Vec<GeneratorRecord>,
    pub buses: Vec<BusRecord>,
    pub losses_mw: f64,
    pub warnings: Vec<String>,
}

impl StageRecord {
    pub fn from_stage(r: &StageResult) -> Self {
        let base = r.mva_base;
        let l = &r.state.layout;
        StageRecord {
            label: r.label.to_string(),
            converged: r.report.converged,
            iterations: r.report.iterations,
            residual: r.report.final_residual_norm,
            df_hz: r.df,
            ace_by_area_mw: r.ace_by_area.iter().map(|(id, m)| (id.to_string(), m.ace * base)).collect(),
            generators: r
                .dispatch
                .iter()
                .map(|d| GeneratorRecord {
                    id: d.id,
                    p_set: d.p_set * base,
                    dp_primary: d.dp_primary * base,
                    dp_secondary: d.dp_secondary * base,
                    p_total: d.p_total * base,
                    q: d.q * base,
                })
                .collect(),
            buses: (0..l.n_bus())
                .map(|k| {
                    let v = r.state.voltage(k);
                    BusRecord { id: l.bus_ids[k], v_mag: v.norm(), v_angle_deg: v.arg().to_degrees() }
                })
                .collect(),
            losses_mw: r.losses * base,
            warnings: r.report.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsFile {
    /// Seconds since the Unix epoch at write time; the only field that varies
    /// between identical runs.
    pub timestamp: u64,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl ResultsFile {
    pub fn new(stages: &[StageResult], warnings: Vec<String>, error: Option<String>) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        ResultsFile { timestamp, stages: stages.iter().map(StageRecord::from_stage).collect(), warnings, error }
    }

    pub fn all_converged(&self) -> bool {
        self.stages.iter().all(|s| s.converged)
    }
}

/// Pretty JSON where every float carries 17 significant digits.
struct PreciseFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for PreciseFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with full-precision floats; non-finite values become `null`.
pub fn to_precise_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Parameter(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn write_results(results: &ResultsFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_precise_json(results)?).map_err(io_err(path))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    stage: &'a str,
    id: u32,
    p_set_mw: f64,
    dp_primary_mw: f64,
    dp_secondary_mw: f64,
    p_total_mw: f64,
    q_mvar: f64,
    df_hz: f64,
}

/// One row per generator per stage.
pub fn write_generator_csv<W: Write>(results: &ResultsFile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parameter(format!("csv: {e}"));
    for s in &results.stages {
        for g in &s.generators {
            w.serialize(CsvRow {
                stage: &s.label,
                id: g.id,
                p_set_mw: g.p_set,
                dp_primary_mw: g.dp_primary,
                dp_secondary_mw: g.dp_secondary,
                p_total_mw: g.p_total,
                q_mvar: g.q,
                df_hz: s.df_hz,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Parameter(format!("csv: {e}")))?;
    Ok(())
}

pub fn write_generator_csv_file(results: &ResultsFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_generator_csv(results, io::BufWriter::new(file))
}
