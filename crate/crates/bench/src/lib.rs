//! Shared fixtures for the criterion benches.

use heston_clse::{HestonParams, SimulationConfig};

/// The parameter set used throughout the benches.
pub fn reference_params() -> HestonParams {
    HestonParams::new(2.0, 0.5, 0.1, -1.0, 0.4, 0.3, -0.5, 1.0, 0.0)
        .expect("reference parameters are valid")
}

pub fn reference_sim(seed: u64) -> SimulationConfig {
    SimulationConfig {
        substeps: 64,
        seed,
        scheme: heston_clse::Scheme::ExactCir,
    }
}
