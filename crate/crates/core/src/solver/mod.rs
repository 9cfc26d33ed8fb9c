//! Augmented current-voltage power flow and its Newton solver.

mod assemble;
mod flows;
mod linear;
mod model;
mod newton;

pub use assemble::{assemble, assemble_jacobian, assemble_residuals, FrequencyClosure, Triplets};
pub use flows::{
    active_losses, area_exports, branch_flows, power_balance, slack_power, unit_outputs,
    BranchFlow, PowerBalance, UnitOutput,
};
pub use linear::{LinearError, SparseLu};
pub use model::{
    flat_start, BranchModel, BusRole, GenUnit, SolverModel, SolverState, StateLayout, Unknown,
};
pub use newton::{inf_norm, nr_solve, solve_model, SolveReport, SolverOptions};

#[cfg(test)]
pub(crate) mod test_cases {
    use crate::io::parse_case_str;
    use crate::network::{fixtures::two_bus, to_per_unit, NetworkCase};
    use crate::synth::{synthetic_grid, SynthParams};

    pub fn two_bus_pu() -> NetworkCase {
        to_per_unit(&two_bus()).unwrap()
    }

    pub fn four_bus_pu() -> NetworkCase {
        parse_case_str(include_str!("../../fixtures/fourbus.json")).unwrap()
    }

    /// 30-bus synthetic grid with a frequency-sensitive load mix.
    pub fn synthetic_pu() -> NetworkCase {
        let mut case = synthetic_grid(&SynthParams::new(30, 11));
        for (i, l) in case.loads.iter_mut().enumerate() {
            l.zip_p = [0.3, 0.2, 0.5];
            l.zip_q = [0.5, 0.0, 0.5];
            l.k_pf = 0.01 * (i % 3) as f64;
            l.k_qf = -0.005 * (i % 2) as f64;
        }
        to_per_unit(&case).unwrap()
    }
}
