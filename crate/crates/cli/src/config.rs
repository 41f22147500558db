//! Resolved settings for every subcommand. Each is read from an optional
//! TOML file, missing keys taking the defaults below, and is stored verbatim
//! in the run manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use synapse_cascade::bench::BenchConfig;
use synapse_cascade::fit::{FitParameter, Unknown};
use synapse_cascade::{ChainConfig, DriveRule, PulseSchedule, Segment};

pub fn relaxation_chain() -> ChainConfig {
    ChainConfig::new(vec![1.0, 1.0], vec![2f64.powf(-7.5)]).expect("valid default chain")
}

fn schedule(amplitude: f64, frequency: f64, on_fraction: f64, count: u32) -> PulseSchedule {
    PulseSchedule {
        amplitude,
        frequency,
        on_fraction,
        count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub chain: ChainConfig,
    pub drive: DriveRule,
    pub schedule: PulseSchedule,
    pub samples_per_phase: usize,
    /// Starting levels; rest when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            chain: ChainConfig::simple(),
            drive: DriveRule::default(),
            schedule: schedule(1.0, 1.0, 0.5, 80),
            samples_per_phase: 1,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationConfig {
    pub pulse: PulseSchedule,
    pub observe: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            pulse: schedule(3.0, 1.0, 1.0, 1),
            observe: 160.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub potentiation: PulseSchedule,
    pub depression: PulseSchedule,
    pub cycles: usize,
    pub threshold: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            potentiation: schedule(1.0, 1.0, 0.5, 80),
            depression: schedule(-1.0, 1.0, 0.5, 80),
            cycles: 20,
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    pub forward: PulseSchedule,
    pub reverse_amplitude: f64,
    /// Weight units; 1% of the forward range when absent.
    pub tolerance: Option<f64>,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self {
            forward: schedule(1.0, 1.0, 0.5, 80),
            reverse_amplitude: -1.0,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Cycle,
    Relaxation,
    Recover,
}

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::Cycle => "cycle",
            Recipe::Relaxation => "relaxation",
            Recipe::Recover => "recover",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub chain: ChainConfig,
    pub drive: DriveRule,
    pub relaxation: RelaxationConfig,
    pub cycle: CycleConfig,
    pub recover: RecoverConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            chain: relaxation_chain(),
            drive: DriveRule::default(),
            relaxation: RelaxationConfig::default(),
            cycle: CycleConfig::default(),
            recover: RecoverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Observed trace CSV.
    pub trace: Option<PathBuf>,
    /// Chain with the fitted entries at arbitrary placeholder values.
    pub chain: ChainConfig,
    pub drive: DriveRule,
    pub segments: Vec<Segment>,
    pub unknowns: Vec<FitParameter>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            trace: None,
            chain: relaxation_chain(),
            drive: DriveRule::default(),
            segments: vec![
                Segment::Pulses(schedule(3.0, 1.0, 1.0, 1)),
                Segment::Rest { duration: 160.0 },
            ],
            unknowns: vec![FitParameter::new(Unknown::Coupling(0), -10.0, -3.0)],
        }
    }
}

/// Benchmark settings plus the optional pattern source. In TOML files the
/// benchmark keys sit at the top level next to `features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BenchRunConfig {
    pub bench: BenchConfig,
    /// Feature matrix (CSV or FVEC) supplying the patterns instead of
    /// random ones.
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub input: Option<PathBuf>,
    /// X column; the first column when absent.
    pub x: Option<String>,
    /// Y columns; every other numeric column when empty.
    pub columns: Vec<String>,
    pub log_x: bool,
    pub title: Option<String>,
    pub output: String,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self {
            input: None,
            x: None,
            columns: Vec::new(),
            log_x: false,
            title: None,
            output: "chart.svg".into(),
        }
    }
}

/// A fully resolved invocation, as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Resolved {
    Simulate(SimulateConfig),
    Protocol { recipe: Recipe, config: ProtocolConfig },
    Fit(FitConfig),
    Bench(BenchRunConfig),
    Plot(PlotConfig),
}

impl Resolved {
    pub fn label(&self) -> String {
        match self {
            Resolved::Simulate(_) => "simulate".into(),
            Resolved::Protocol { recipe, .. } => format!("protocol-{}", recipe.name()),
            Resolved::Fit(_) => "fit".into(),
            Resolved::Bench(_) => "bench".into(),
            Resolved::Plot(_) => "plot".into(),
        }
    }
}

pub const DEFAULTS_HELP: &str = "\
Configuration files are TOML; every key is optional.

simulate    chain = { capacities = [1.0], couplings = [] }
            drive = { mode = \"constant\", base_rate = 2.0 }
              (or mode = \"soft-bounded\" with u_min, u_max)
            schedule = { amplitude = 1.0, frequency = 1.0, on_fraction = 0.5, count = 80 }
            samples_per_phase = 1, initial = rest
protocol    chain = { capacities = [1.0, 1.0], couplings = [2^-7.5] }, drive as above
            relaxation = { pulse = 3 V, 1 Hz, on_fraction 1, 1 pulse; observe = 160.0 }
            cycle = { potentiation/depression = +/-1 V, 1 Hz, 0.5, 80 pulses;
                      cycles = 20, threshold = 1e-3 }
            recover = { forward = +1 V, 1 Hz, 0.5, 80 pulses; reverse_amplitude = -1.0;
                        tolerance = 1% of forward range }
fit         trace = <csv>, chain and drive as for protocol,
            segments = [3 V 1 s pulse, 160 s rest],
            unknowns = [{ unknown = { kind = \"coupling\", index = 0 }, lower = -10, upper = -3 }]
bench       neurons = 128, synapse = { kind = \"chain\", capacities = [1.0] },
            learning_rate = 1.0, stream_length = 1536, first_probe = 768,
            probe_interval = 4, probe_ages = [0, 1, 2, 3, 4, 6, ..., 384, 512],
            null_probes = 200, trials = 20, calibration_trials = 4,
            step_time = 64.0, weight_bound = 2.0, accuracy_threshold = 0.6,
            snr_threshold = 0.3, seed = 0, features = none
plot        input = <csv>, x = first column, columns = all others, log_x = false,
            output = \"chart.svg\"";
