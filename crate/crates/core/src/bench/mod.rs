//! Online familiarity-memory benchmark built from chain synapses.

pub mod array;
pub mod metrics;
pub mod run;
pub mod stream;

pub use array::{matched_simple, LeakySynapse, SynapseDynamics, SynapticArray};
pub use metrics::{
    balanced_accuracy, calibrate_threshold, fc_decide, fd_decide, io_snr, lifetime, r_snr, Decision, Metric,
    MetricSeries,
};
pub use run::{run_benchmark, run_benchmark_on, BenchConfig, Lifetimes, SynapseModel, DEFAULT_PROBE_AGES};
pub use stream::{ingest_features, make_random_stream, random_pattern, Pattern, PatternStream, StreamSource};
