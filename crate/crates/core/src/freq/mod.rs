//! Frequency-coupled device models.

mod ace;
mod droop;
mod load;

pub use ace::{ace_value, compute_ace, secondary_setpoints, AceMeasurement};
pub use droop::{build_droop_model, DroopRegion, Quadratic, SmoothDroopModel, DEFAULT_SMOOTHING_HZ};
pub use load::{scaled_load, scaled_load_with_derivatives, LoadEval};
