use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::array::{matched_simple, SynapseDynamics, SynapticArray};
use super::metrics::{balanced_accuracy, calibrate_threshold, fc_decide, mean_and_se, snr_from_null, Metric, MetricSeries};
use super::stream::{random_pattern, Pattern, PatternStream};
use crate::chain::{ChainConfig, Propagator};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Synapse model used by every weight and bias of the memory module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynapseModel {
    Chain(ChainConfig),
    /// Leaky single-variable synapse with the chain's slowest timescale.
    MatchedLeaky(ChainConfig),
}

impl SynapseModel {
    pub fn dynamics(&self) -> Result<Box<dyn SynapseDynamics + Send + Sync>> {
        Ok(match self {
            SynapseModel::Chain(c) => Box::new(Propagator::new(c)?),
            SynapseModel::MatchedLeaky(c) => Box::new(matched_simple(c)?),
        })
    }

    /// Dynamical variables per synapse.
    pub fn levels(&self) -> usize {
        match self {
            SynapseModel::Chain(c) => c.len(),
            SynapseModel::MatchedLeaky(_) => 1,
        }
    }
}

pub const DEFAULT_PROBE_AGES: [usize; 19] = [0, 1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512];

/// Benchmark settings. Probing starts once `first_probe` patterns have been
/// presented and repeats every `probe_interval` presentations; at each
/// probe point every listed age is read out without plasticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub neurons: usize,
    pub synapse: SynapseModel,
    pub learning_rate: f64,
    pub stream_length: usize,
    pub probe_ages: Vec<usize>,
    pub first_probe: usize,
    pub probe_interval: usize,
    /// Minimum novel probes per trial, spread over the probe points.
    pub null_probes: usize,
    pub trials: usize,
    /// Extra trials, with their own seeds, used only to place FD thresholds.
    pub calibration_trials: usize,
    /// Seconds of chain evolution per presentation.
    pub step_time: f64,
    /// Clip visible weights to `[-b, b]` after each write.
    pub weight_bound: Option<f64>,
    pub accuracy_threshold: f64,
    pub snr_threshold: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            neurons: 128,
            synapse: SynapseModel::Chain(ChainConfig::simple()),
            learning_rate: 1.0,
            stream_length: 1536,
            probe_ages: DEFAULT_PROBE_AGES.to_vec(),
            first_probe: 768,
            probe_interval: 4,
            null_probes: 200,
            trials: 20,
            calibration_trials: 4,
            step_time: 64.0,
            weight_bound: Some(2.0),
            accuracy_threshold: 0.6,
            snr_threshold: 0.3,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neurons < 2 {
            return Err(Error::invalid("at least two neurons are required"));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::invalid(format!("learning rate {} must lie in [0, 1]", self.learning_rate)));
        }
        if self.stream_length == 0 || self.trials == 0 || self.calibration_trials == 0 {
            return Err(Error::invalid("stream length, trials and calibration trials must be positive"));
        }
        if self.probe_ages.is_empty() || self.probe_ages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("probe ages must be non-empty and strictly increasing"));
        }
        if self.first_probe == 0 || self.first_probe > self.stream_length {
            return Err(Error::invalid("the first probe point must lie within the stream"));
        }
        let oldest = *self.probe_ages.last().unwrap();
        if oldest >= self.first_probe {
            return Err(Error::invalid(format!(
                "probe age {oldest} needs at least {} presentations before the first probe point",
                oldest + 1
            )));
        }
        if self.probe_interval == 0 {
            return Err(Error::invalid("probe interval must be positive"));
        }
        if self.null_probes < 2 {
            return Err(Error::invalid("at least two null probes are needed"));
        }
        if !(self.step_time >= 0.0 && self.step_time.is_finite()) {
            return Err(Error::invalid("step time must be finite and non-negative"));
        }
        if let Some(b) = self.weight_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("weight bound must be positive"));
            }
        }
        if !(self.accuracy_threshold > 0.0 && self.accuracy_threshold < 1.0) {
            return Err(Error::invalid("accuracy threshold must lie in (0, 1)"));
        }
        if !(self.snr_threshold > 0.0) {
            return Err(Error::invalid("SNR threshold must be positive"));
        }
        self.synapse.dynamics().map(|_| ())
    }

    fn probe_points(&self) -> Vec<usize> {
        (self.first_probe..=self.stream_length).step_by(self.probe_interval).collect()
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|i| derive_seed(self.seed, i)).collect()
    }

    pub fn calibration_seeds(&self) -> Vec<u64> {
        let base = derive_seed(self.seed, u64::MAX);
        (0..self.calibration_trials as u64).map(|i| derive_seed(base, i)).collect()
    }

    /// Total dynamical variables of the module.
    pub fn variable_count(&self) -> usize {
        self.neurons * self.neurons * self.synapse.levels()
    }
}

/// Raw readouts of one trial.
#[derive(Debug, Clone)]
struct TrialRecord {
    /// `familiar[a]`: recall distances of age-`a` probes.
    familiar: Vec<Vec<f64>>,
    familiar_overlap: Vec<Vec<f64>>,
    null: Vec<f64>,
    null_overlap: Vec<f64>,
    fc_correct: Vec<usize>,
    fc_total: Vec<usize>,
}

/// Where stored and novel patterns come from.
enum Source<'a> {
    Random,
    /// Items are shuffled per trial; the first `stream_length` are stored and
    /// the rest serve as novel probes.
    Pool(&'a [Pattern]),
}

fn run_trial(cfg: &BenchConfig, dynamics: &dyn SynapseDynamics, source: &Source, seed: u64) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.neurons;
    let (stream, novel_pool): (Vec<Pattern>, Vec<Pattern>) = match source {
        Source::Random => ((0..cfg.stream_length).map(|_| random_pattern(n, &mut rng)).collect(), Vec::new()),
        Source::Pool(items) => {
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.shuffle(&mut rng);
            let (stored, novel) = order.split_at(cfg.stream_length);
            (
                stored.iter().map(|&i| items[i].clone()).collect(),
                novel.iter().map(|&i| items[i].clone()).collect(),
            )
        }
    };
    let mut next_novel = 0usize;
    let mut novel = |rng: &mut ChaCha8Rng| -> Pattern {
        if novel_pool.is_empty() {
            random_pattern(n, rng)
        } else {
            next_novel += 1;
            novel_pool[(next_novel - 1) % novel_pool.len()].clone()
        }
    };

    let mut array = SynapticArray::new(n, dynamics, cfg.learning_rate, cfg.step_time, cfg.weight_bound)?;
    let points = cfg.probe_points();
    let per_point = cfg.null_probes.div_ceil(points.len()).max(1);
    let ages = cfg.probe_ages.len();
    let mut rec = TrialRecord {
        familiar: vec![Vec::with_capacity(points.len()); ages],
        familiar_overlap: vec![Vec::with_capacity(points.len()); ages],
        null: Vec::new(),
        null_overlap: Vec::new(),
        fc_correct: vec![0; ages],
        fc_total: vec![0; ages],
    };

    let mut presented = 0;
    for &point in &points {
        while presented < point {
            array.present(&stream[presented], &mut rng)?;
            presented += 1;
        }
        let mut null_d = Vec::with_capacity(per_point);
        for _ in 0..per_point {
            let (d, o) = array.probe(&novel(&mut rng))?;
            null_d.push(d);
            rec.null.push(d as f64);
            rec.null_overlap.push(o);
        }
        for (k, &age) in cfg.probe_ages.iter().enumerate() {
            let (d, o) = array.probe(&stream[point - 1 - age])?;
            rec.familiar[k].push(d as f64);
            rec.familiar_overlap[k].push(o);
            if fc_decide(d, null_d[k % per_point], &mut rng) {
                rec.fc_correct[k] += 1;
            }
            rec.fc_total[k] += 1;
        }
    }
    Ok(rec)
}

fn run_trials(cfg: &BenchConfig, source: &Source, seeds: &[u64]) -> Result<Vec<TrialRecord>> {
    let model = cfg.synapse.dynamics()?;
    let dynamics: &(dyn SynapseDynamics + Send + Sync) = model.as_ref();
    seeds.par_iter().map(|&s| run_trial(cfg, dynamics, source, s)).collect()
}

fn summarize(cfg: &BenchConfig, calibration: &[TrialRecord], trials: &[TrialRecord]) -> Result<MetricSeries> {
    let ages = cfg.probe_ages.len();
    let cal_null: Vec<f64> = calibration.iter().flat_map(|r| r.null.iter().copied()).collect();
    let thresholds: Vec<f64> = (0..ages)
        .map(|k| {
            let fam: Vec<f64> = calibration.iter().flat_map(|r| r.familiar[k].iter().copied()).collect();
            calibrate_threshold(&cal_null, &fam)
        })
        .collect::<Result<_>>()?;

    let mut out = MetricSeries {
        ages: cfg.probe_ages.clone(),
        io_snr: Vec::with_capacity(ages),
        io_snr_se: Vec::with_capacity(ages),
        r_snr: Vec::with_capacity(ages),
        r_snr_se: Vec::with_capacity(ages),
        fd_accuracy: Vec::with_capacity(ages),
        fd_accuracy_se: Vec::with_capacity(ages),
        fc_accuracy: Vec::with_capacity(ages),
        fc_accuracy_se: Vec::with_capacity(ages),
        trials: trials.len(),
    };
    for k in 0..ages {
        let mut io = Vec::with_capacity(trials.len());
        let mut rs = Vec::with_capacity(trials.len());
        let mut fd = Vec::with_capacity(trials.len());
        let mut fc = Vec::with_capacity(trials.len());
        for r in trials {
            let (fam_overlap, _) = mean_and_se(&r.familiar_overlap[k]);
            io.push(snr_from_null(fam_overlap, &r.null_overlap)?);
            rs.push(super::metrics::r_snr(&r.familiar[k], &r.null)?);
            fd.push(balanced_accuracy(&r.null, &r.familiar[k], thresholds[k])?);
            fc.push(r.fc_correct[k] as f64 / r.fc_total[k] as f64);
        }
        for (v, (m, se)) in [
            (&io, (&mut out.io_snr, &mut out.io_snr_se)),
            (&rs, (&mut out.r_snr, &mut out.r_snr_se)),
            (&fd, (&mut out.fd_accuracy, &mut out.fd_accuracy_se)),
            (&fc, (&mut out.fc_accuracy, &mut out.fc_accuracy_se)),
        ] {
            let (mean, err) = mean_and_se(v);
            m.push(mean);
            se.push(err);
        }
    }
    Ok(out)
}

/// Runs the random-pattern benchmark. Trials run in parallel; results do not
/// depend on the thread count.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<MetricSeries> {
    cfg.validate()?;
    let calibration = run_trials(cfg, &Source::Random, &cfg.calibration_seeds())?;
    let trials = run_trials(cfg, &Source::Random, &cfg.trial_seeds())?;
    summarize(cfg, &calibration, &trials)
}

/// Runs the benchmark on a fixed pool of patterns (for example ingested
/// features). Each trial stores `stream_length` pool items in a shuffled
/// order and draws novel probes from the remainder.
pub fn run_benchmark_on(cfg: &BenchConfig, pool: &PatternStream) -> Result<MetricSeries> {
    cfg.validate()?;
    if pool.width() != cfg.neurons {
        return Err(Error::invalid(format!(
            "patterns have {} entries but the module has {} neurons",
            pool.width(),
            cfg.neurons
        )));
    }
    if pool.len() <= cfg.stream_length {
        return Err(Error::invalid(format!(
            "a pool of {} items leaves no novel probes for a stream of {}",
            pool.len(),
            cfg.stream_length
        )));
    }
    let source = Source::Pool(pool.patterns());
    let calibration = run_trials(cfg, &source, &cfg.calibration_seeds())?;
    let trials = run_trials(cfg, &source, &cfg.trial_seeds())?;
    summarize(cfg, &calibration, &trials)
}

/// Lifetimes of every metric at the configured thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lifetimes {
    pub fd: f64,
    pub fc: f64,
    pub io_snr: f64,
    pub r_snr: f64,
}

impl Lifetimes {
    pub fn of(series: &MetricSeries, cfg: &BenchConfig) -> Result<Self> {
        Ok(Self {
            fd: series.lifetime(Metric::Fd, cfg.accuracy_threshold)?,
            fc: series.lifetime(Metric::Fc, cfg.accuracy_threshold)?,
            io_snr: series.lifetime(Metric::IoSnr, cfg.snr_threshold)?,
            r_snr: series.lifetime(Metric::RSnr, cfg.snr_threshold)?,
        })
    }
}
