//! Area control error and the AGC setpoints derived from it.
//!
//! Sign convention: `ACE = (P_sched - P_actual) - 10·β·Δf` with `β` stored as a
//! positive magnitude, so an under-frequency event yields a positive ACE and
//! a positive call for generation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{area_of_bus, Area, NetworkCase};
use crate::orchestrator::StageResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AceMeasurement {
    pub area_id: u32,
    /// Scheduled minus actual net export, pu.
    pub interchange_deviation: f64,
    /// Bias magnitude, pu per 0.1 Hz.
    pub beta: f64,
    /// Frequency deviation at measurement time, Hz.
    pub delta_f1: f64,
    pub ace: f64,
}

pub fn ace_value(interchange_deviation: f64, beta: f64, delta_f: f64) -> f64 {
    interchange_deviation - 10.0 * beta * delta_f
}

impl AceMeasurement {
    pub fn new(area_id: u32, interchange_deviation: f64, beta: f64, delta_f1: f64) -> Self {
        AceMeasurement {
            area_id,
            interchange_deviation,
            beta,
            delta_f1,
            ace: ace_value(interchange_deviation, beta, delta_f1),
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.ace == ace_value(self.interchange_deviation, self.beta, self.delta_f1)
    }
}

/// ACE of `area` at the operating point of `stage`.
pub fn compute_ace(area: &Area, stage: &StageResult) -> Result<AceMeasurement> {
    let actual = *stage.area_export.get(&area.id).ok_or(Error::UnknownArea(area.id))?;
    Ok(AceMeasurement::new(
        area.id,
        area.scheduled_interchange - actual,
        area.beta,
        stage.df,
    ))
}

/// `ΔP^s = κ·ACE` for every in-service AGC generator, zero for the rest.
pub fn secondary_setpoints(
    case: &NetworkCase,
    measurements: &BTreeMap<u32, AceMeasurement>,
) -> BTreeMap<u32, f64> {
    let areas = area_of_bus(case);
    case.generators
        .iter()
        .map(|g| {
            let ace = areas
                .get(&g.bus_id)
                .and_then(|a| measurements.get(a))
                .map_or(0.0, |m| m.ace);
            let dp = if g.agc && g.status.in_service() { g.kappa * ace } else { 0.0 };
            (g.id, dp)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::two_bus;
    use crate::network::to_per_unit;

    #[test]
    fn no_disturbance_no_ace() {
        assert_eq!(AceMeasurement::new(1, 0.0, 0.5, 0.0).ace, 0.0);
    }

    #[test]
    fn single_area_bias_term() {
        // 10β = 100 MW/Hz, Δf = -0.5 Hz
        let m = AceMeasurement::new(1, 0.0, 10.0, -0.5);
        assert_eq!(m.ace, 50.0);
        assert!(m.is_consistent());
    }

    #[test]
    fn setpoints_follow_participation() {
        let mut case = to_per_unit(&two_bus()).unwrap();
        case.generators[0].kappa = 0.5;
        let ms = BTreeMap::from([(1, AceMeasurement::new(1, 0.0, 0.1, -0.5))]);
        let sp = secondary_setpoints(&case, &ms);
        assert!((sp[&1] - 0.25).abs() < 1e-15);

        case.generators[0].agc = false;
        assert_eq!(secondary_setpoints(&case, &ms)[&1], 0.0);
    }
}
