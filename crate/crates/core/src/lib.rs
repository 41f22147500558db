//! Simulation, fitting and benchmarking of multi-compartment (cascade)
//! synapse models.

mod error;
pub mod bench;
pub mod chain;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod protocol;
pub mod seed;

pub use chain::{
    apply_pulse_train, apply_pulse_train_with, build_coupling_matrix, build_propagator, drive_strength,
    effective_weight, evolve_driven, evolve_free, slowest_timescale, ChainConfig, ChainState, DriveRule, Propagator,
    TraceOptions,
};
pub use error::{Error, Result};
pub use fit::{fit, residual, FitParameter, FitProblem, FitResult, Unknown};
pub use io::{read_trace, write_trace, FeatureMatrix};
pub use linalg::{eig_sym, top_components, EigenDecomposition, SymmetricMatrix};
pub use oracle::euler_oracle;
pub use protocol::{
    recover_to_baseline, recovery_fraction, run_cycle, run_protocol, run_relaxation, sample_protocol, CycleReport,
    Phase, PulseSchedule, Segment, TraceSample, WeightTrace,
};
