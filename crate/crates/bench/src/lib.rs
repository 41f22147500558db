//! Shared fixtures for the criterion benchmarks.

use synapse_cascade::{ChainConfig, PulseSchedule};

/// Four-compartment chain with capacities doubling and couplings halving
/// along the chain.
pub fn four_compartment() -> ChainConfig {
    ChainConfig::new(
        vec![1.0, 1.0, 2.0, 4.0],
        vec![2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8)],
    )
    .expect("valid chain")
}

/// Eighty 1 V pulses at 1 Hz, half duty cycle.
pub fn standard_train() -> PulseSchedule {
    PulseSchedule::new(1.0, 1.0, 0.5, 80).expect("valid schedule")
}
