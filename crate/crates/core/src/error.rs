use thiserror::Error;

use crate::network::ValidationReport;
use crate::orchestrator::StageResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("unsupported records: {}", .0.join(", "))]
    Unsupported(Vec<String>),

    #[error("case failed validation:\n{0}")]
    Invalid(ValidationReport),

    #[error("unit conversion error: {0}")]
    Units(String),

    #[error("droop patches overlap for generator {gen_id}: linear region spans {span_hz:.6} Hz, patch width is {width_hz} Hz")]
    OverlappingPatch {
        gen_id: u32,
        span_hz: f64,
        width_hz: f64,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("near-singular voltage at bus {bus_id}: |V|^2 = {v_sq:e}")]
    NearSingularVoltage { bus_id: u32, v_sq: f64 },

    #[error("singular jacobian: no usable pivot for unknown {unknown} of bus {bus_id}")]
    SingularJacobian { bus_id: u32, unknown: String },

    #[error("unknown area {0}")]
    UnknownArea(u32),

    #[error("unknown {kind} id {id}")]
    MissingId { kind: &'static str, id: u32 },

    #[error("network is islanded; buses unreachable from the slack: {0:?}")]
    Islanded(Vec<u32>),

    #[error("{label} solve did not converge after {} iterations (residual {:e})", .result.report.iterations, .result.report.final_residual_norm)]
    NotConverged {
        label: String,
        result: Box<StageResult>,
    },
}
