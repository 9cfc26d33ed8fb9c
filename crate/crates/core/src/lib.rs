//! Steady-state AC power flow in current-voltage coordinates with a global
//! frequency-deviation unknown.
//!
//! Generators respond to frequency through a smoothly saturating droop model,
//! AGC setpoints are derived from area control error, and the two control
//! layers are solved as successive steady states:
//!
//! ```text
//! base (t1) --event--> primary (t2) --ACE--> secondary (t3) --event--> ...
//! ```
//!
//! Modules:
//! - [`network`]: case description, validation, per-unit conversion
//! - [`freq`]: droop model, ACE, AGC setpoints, frequency-dependent loads
//! - [`solver`]: residual/Jacobian assembly and damped Newton-Raphson
//! - [`orchestrator`]: stage sequencing and event timelines
//! - [`io`]: case/event/results files and MATPOWER import
//! - [`synth`]: deterministic synthetic grids for tests and benchmarks

pub mod cli;
pub mod error;
pub mod freq;
pub mod io;
pub mod network;
pub mod orchestrator;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
