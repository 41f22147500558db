//! Device write protocols: pulse trains, potentiation/depression cycles,
//! single-pulse relaxation and recovery searches.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{drive_phase, drive_strength, drive_train, effective_weight, ChainState, DriveRule, Propagator, TraceOptions};
use crate::error::{Error, Result};

/// Free-evolution samples recorded after a relaxation pulse or rest segment.
pub const RELAXATION_SAMPLES: usize = 200;

/// Recovery searches give up after this many times the forward pulse count.
pub const RECOVERY_CAP_FACTOR: u32 = 10;

/// A train of identical rectangular write pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Signed write voltage.
    pub amplitude: f64,
    /// Pulses per second.
    pub frequency: f64,
    /// Fraction of each period during which the voltage is applied.
    pub on_fraction: f64,
    pub count: u32,
}

impl PulseSchedule {
    pub fn new(amplitude: f64, frequency: f64, on_fraction: f64, count: u32) -> Result<Self> {
        let s = Self {
            amplitude,
            frequency,
            on_fraction,
            count,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::invalid("pulse amplitude must be finite"));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::invalid(format!("pulse frequency {} must be positive", self.frequency)));
        }
        if !(self.on_fraction > 0.0 && self.on_fraction <= 1.0) {
            return Err(Error::invalid(format!("on fraction {} must lie in (0, 1]", self.on_fraction)));
        }
        if self.count == 0 {
            return Err(Error::invalid("pulse count must be at least 1"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn on_duration(&self) -> f64 {
        self.on_fraction / self.frequency
    }

    pub fn duration(&self) -> f64 {
        self.count as f64 / self.frequency
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn with_count(self, count: u32) -> Self {
        Self { count, ..self }
    }
}

/// What a trace sample marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    On,
    Off,
    Free,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Initial => "init",
            Phase::On => "on",
            Phase::Off => "off",
            Phase::Free => "free",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "init" => Ok(Phase::Initial),
            "on" => Ok(Phase::On),
            "off" => Ok(Phase::Off),
            "free" => Ok(Phase::Free),
            other => Err(Error::invalid(format!("unknown phase `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    pub u: Vec<f64>,
    pub pulse_index: u32,
    pub phase: Phase,
}

impl TraceSample {
    pub fn new(state: &ChainState, pulse_index: u32, phase: Phase) -> Self {
        Self {
            time: state.time,
            u: state.u.clone(),
            pulse_index,
            phase,
        }
    }

    pub fn u1(&self) -> f64 {
        self.u[0]
    }
}

/// Time-ordered chain samples with phase annotations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightTrace {
    samples: Vec<TraceSample>,
}

impl WeightTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<TraceSample>) -> Result<Self> {
        let mut t = Self::new();
        for s in samples {
            t.push(s)?;
        }
        Ok(t)
    }

    /// Appends a sample; times must strictly increase, levels must be finite
    /// and agree in length with earlier samples.
    pub fn push(&mut self, sample: TraceSample) -> Result<()> {
        if sample.u.is_empty() || sample.u.iter().any(|x| !x.is_finite()) || !sample.time.is_finite() {
            return Err(Error::invalid(format!("non-finite or empty sample at t={}", sample.time)));
        }
        if let Some(last) = self.samples.last() {
            if sample.time <= last.time {
                return Err(Error::invalid(format!(
                    "sample time {} does not follow {}",
                    sample.time, last.time
                )));
            }
            if sample.u.len() != last.u.len() {
                return Err(Error::invalid("samples disagree on chain length"));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of compartments, or 0 for an empty trace.
    pub fn chain_len(&self) -> usize {
        self.samples.first().map_or(0, |s| s.u.len())
    }

    pub fn first(&self) -> Option<&TraceSample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn u1(&self) -> Vec<f64> {
        self.samples.iter().map(TraceSample::u1).collect()
    }

    /// Final minus initial visible weight.
    pub fn u1_change(&self) -> f64 {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => b.u1() - a.u1(),
            _ => 0.0,
        }
    }

    /// Peak-to-peak visible weight.
    pub fn u1_range(&self) -> f64 {
        range(self.samples.iter().map(TraceSample::u1))
    }

    pub fn final_state(&self) -> Option<ChainState> {
        self.last().map(|s| ChainState::new(s.u.clone(), s.time))
    }
}

fn range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Summary of a repeated potentiation/depression run.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Peak-to-peak `u1` of each leg, two entries per cycle.
    pub per_cycle_range: Vec<f64>,
    /// `convergence[i]` compares cycle `i + 2` with cycle `i + 1`: the largest
    /// absolute difference of any level at matching within-cycle samples.
    pub convergence: Vec<f64>,
}

impl CycleReport {
    /// First cycle (1-based) whose difference to its predecessor is at most
    /// `threshold`.
    pub fn cycles_to_convergence(&self, threshold: f64) -> Option<usize> {
        self.convergence.iter().position(|d| *d <= threshold).map(|i| i + 2)
    }
}

/// Alternates `pot` and `dep` legs for `cycles` cycles from a resting chain.
pub fn run_cycle(
    p: &Propagator,
    rule: &DriveRule,
    pot: &PulseSchedule,
    dep: &PulseSchedule,
    cycles: usize,
) -> Result<(WeightTrace, CycleReport)> {
    run_cycle_from(p, rule, pot, dep, cycles, &ChainState::zeros(p.len()))
}

pub fn run_cycle_from(
    p: &Propagator,
    rule: &DriveRule,
    pot: &PulseSchedule,
    dep: &PulseSchedule,
    cycles: usize,
    initial: &ChainState,
) -> Result<(WeightTrace, CycleReport)> {
    pot.validate()?;
    dep.validate()?;
    rule.validate()?;
    if pot.amplitude * dep.amplitude >= 0.0 {
        return Err(Error::invalid("the two legs of a cycle need amplitudes of opposite sign"));
    }
    if cycles == 0 {
        return Err(Error::invalid("at least one cycle is required"));
    }

    let mut trace = WeightTrace::new();
    trace.push(TraceSample::new(initial, 0, Phase::Initial))?;
    let mut state = initial.clone();
    let mut pulse = 1;
    // sample index where each leg starts (its starting state)
    let mut leg_bounds = Vec::with_capacity(2 * cycles + 1);
    leg_bounds.push(0usize);
    for _ in 0..cycles {
        for leg in [pot, dep] {
            state = drive_train(p, state, leg, rule, TraceOptions::default(), pulse, &mut trace)?;
            pulse += leg.count;
            leg_bounds.push(trace.len() - 1);
        }
    }

    let u1 = trace.u1();
    let per_cycle_range = leg_bounds
        .windows(2)
        .map(|w| range(u1[w[0]..=w[1]].iter().copied()))
        .collect();

    let per_cycle = leg_bounds[2] - leg_bounds[0];
    let samples = trace.samples();
    let convergence = (1..cycles)
        .map(|c| {
            let prev = &samples[1 + (c - 1) * per_cycle..1 + c * per_cycle];
            let cur = &samples[1 + c * per_cycle..1 + (c + 1) * per_cycle];
            prev.iter()
                .zip(cur)
                .flat_map(|(a, b)| a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        })
        .collect();

    Ok((
        trace,
        CycleReport {
            per_cycle_range,
            convergence,
        },
    ))
}

/// Log-spaced offsets in `(0, observe]`, the smallest at `observe / 1000`.
pub fn log_offsets(observe: f64, n: usize) -> Vec<f64> {
    if observe <= 0.0 || n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![observe];
    }
    let lo = observe * 1e-3;
    let ratio = observe / lo;
    (0..n)
        .map(|k| {
            if k + 1 == n {
                observe
            } else {
                lo * ratio.powf(k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// One driven on-phase of `pulse` from rest, then `observe` seconds of free
/// evolution sampled on a log grid.
pub fn run_relaxation(p: &Propagator, rule: &DriveRule, pulse: &PulseSchedule, observe: f64) -> Result<WeightTrace> {
    pulse.validate()?;
    if pulse.count != 1 {
        return Err(Error::invalid("a relaxation run uses a single pulse"));
    }
    run_protocol(
        p,
        rule,
        &[Segment::Pulses(single_on_phase(pulse)), Segment::Rest { duration: observe }],
        &ChainState::zeros(p.len()),
        TraceOptions::default(),
    )
}

fn single_on_phase(pulse: &PulseSchedule) -> PulseSchedule {
    PulseSchedule {
        amplitude: pulse.amplitude,
        frequency: 1.0 / pulse.on_duration(),
        on_fraction: 1.0,
        count: 1,
    }
}

/// Fraction of the written change in `u1` undone by the end of a relaxation
/// trace: `(u1(pulse end) - u1(final)) / (u1(pulse end) - u1(initial))`.
pub fn recovery_fraction(trace: &WeightTrace) -> Option<f64> {
    let initial = trace.first()?.u1();
    let end = trace.samples().iter().rev().find(|s| s.phase == Phase::On)?.u1();
    let last = trace.last()?.u1();
    let written = end - initial;
    (written != 0.0).then(|| (end - last) / written)
}

/// Reverse pulses needed to bring `u1` back to its value before `forward`,
/// starting from rest.
pub fn recover_to_baseline(
    p: &Propagator,
    rule: &DriveRule,
    forward: &PulseSchedule,
    reverse_amplitude: f64,
    tolerance: Option<f64>,
) -> Result<u32> {
    recover_to_baseline_from(p, rule, forward, reverse_amplitude, tolerance, &ChainState::zeros(p.len()))
}

/// Applies `forward`, then single reverse pulses until `u1` has returned to
/// within `tolerance` of its starting value or passed it. The default
/// tolerance is 1% of the forward leg's peak-to-peak range.
pub fn recover_to_baseline_from(
    p: &Propagator,
    rule: &DriveRule,
    forward: &PulseSchedule,
    reverse_amplitude: f64,
    tolerance: Option<f64>,
    initial: &ChainState,
) -> Result<u32> {
    forward.validate()?;
    rule.validate()?;
    if forward.amplitude * reverse_amplitude >= 0.0 {
        return Err(Error::invalid("reverse amplitude must oppose the forward amplitude"));
    }
    let mut trace = WeightTrace::new();
    trace.push(TraceSample::new(initial, 0, Phase::Initial))?;
    let mut state = drive_train(p, initial.clone(), forward, rule, TraceOptions::default(), 1, &mut trace)?;
    let baseline = effective_weight(initial);
    let tol = tolerance.unwrap_or(0.01 * trace.u1_range());
    let direction = forward.amplitude.signum();

    let reverse = forward.with_amplitude(reverse_amplitude).with_count(1);
    let cap = forward.count.saturating_mul(RECOVERY_CAP_FACTOR);
    let mut scratch = WeightTrace::new();
    for n in 1..=cap {
        state = drive_train(p, state, &reverse, rule, TraceOptions::default(), n, &mut scratch)?;
        if (effective_weight(&state) - baseline) * direction <= tol {
            return Ok(n);
        }
    }
    Err(Error::NonConvergence(format!(
        "u1 still {:.6} from baseline after {cap} reverse pulses",
        (effective_weight(&state) - baseline).abs()
    )))
}

/// A piece of a composite write protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Pulses(PulseSchedule),
    Rest { duration: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Pulses(s) => s.duration(),
            Segment::Rest { duration } => *duration,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Segment::Pulses(s) => s.validate(),
            Segment::Rest { duration } => {
                if *duration >= 0.0 && duration.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("rest duration {duration} must be non-negative")))
                }
            }
        }
    }

    /// Scales the time base by `1/factor`: pulses run `factor` times faster
    /// and rests shrink by `factor`.
    pub fn time_compressed(&self, factor: f64) -> Self {
        match *self {
            Segment::Pulses(s) => Segment::Pulses(PulseSchedule {
                frequency: s.frequency * factor,
                ..s
            }),
            Segment::Rest { duration } => Segment::Rest {
                duration: duration / factor,
            },
        }
    }
}

pub fn protocol_duration(segments: &[Segment]) -> f64 {
    segments.iter().map(Segment::duration).sum()
}

/// Runs a composite protocol, recording pulse boundaries and a log grid of
/// samples over each rest.
pub fn run_protocol(
    p: &Propagator,
    rule: &DriveRule,
    segments: &[Segment],
    initial: &ChainState,
    opts: TraceOptions,
) -> Result<WeightTrace> {
    rule.validate()?;
    let mut trace = WeightTrace::new();
    trace.push(TraceSample::new(initial, 0, Phase::Initial))?;
    let mut state = initial.clone();
    let mut pulse = 1;
    for seg in segments {
        seg.validate()?;
        match seg {
            Segment::Pulses(s) => {
                state = drive_train(p, state, s, rule, opts, pulse, &mut trace)?;
                pulse += s.count;
            }
            Segment::Rest { duration } => {
                let start = state.clone();
                for dt in log_offsets(*duration, RELAXATION_SAMPLES) {
                    let mut x = p.evolve_free(&start, dt)?;
                    x.time = start.time + dt;
                    trace.push(TraceSample::new(&x, pulse.saturating_sub(1), Phase::Free))?;
                }
                state = p.evolve_free(&start, *duration)?;
                state.time = start.time + duration;
            }
        }
    }
    Ok(trace)
}

/// One constant-amplitude stretch of a protocol.
#[derive(Debug, Clone, Copy)]
struct Stretch {
    start: f64,
    duration: f64,
    amplitude: f64,
}

fn stretches(segments: &[Segment], t0: f64) -> Vec<Stretch> {
    let mut out = Vec::new();
    let mut t = t0;
    for seg in segments {
        match *seg {
            Segment::Pulses(s) => {
                let base = t;
                for n in 0..s.count {
                    let start = base + n as f64 * s.period();
                    let on_end = base + (n as f64 + s.on_fraction) * s.period();
                    let off_end = base + (n as f64 + 1.0) * s.period();
                    out.push(Stretch {
                        start,
                        duration: on_end - start,
                        amplitude: s.amplitude,
                    });
                    if off_end > on_end {
                        out.push(Stretch {
                            start: on_end,
                            duration: off_end - on_end,
                            amplitude: 0.0,
                        });
                    }
                }
                t = base + s.count as f64 * s.period();
            }
            Segment::Rest { duration } => {
                out.push(Stretch {
                    start: t,
                    duration,
                    amplitude: 0.0,
                });
                t += duration;
            }
        }
    }
    out
}

/// Visible weight of the protocol's trajectory at each of `times`
/// (ascending). Times before the start return the initial weight; times past
/// the end are rejected.
pub fn sample_protocol(
    p: &Propagator,
    rule: &DriveRule,
    segments: &[Segment],
    initial: &ChainState,
    times: &[f64],
) -> Result<Vec<f64>> {
    rule.validate()?;
    for seg in segments {
        seg.validate()?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("sample times must be ascending"));
    }
    let end = initial.time + protocol_duration(segments);
    if let Some(&t) = times.last() {
        if t > end * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid(format!("sample time {t} lies past the protocol end {end}")));
        }
    }

    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    while idx < times.len() && times[idx] <= initial.time {
        out.push(effective_weight(initial));
        idx += 1;
    }
    let mut state = initial.clone();
    let pending = |state_at: &dyn Fn(f64) -> Result<f64>, until: f64, idx: &mut usize, out: &mut Vec<f64>| -> Result<()> {
        while *idx < times.len() && times[*idx] <= until {
            out.push(state_at(times[*idx])?);
            *idx += 1;
        }
        Ok(())
    };

    let list = stretches(segments, initial.time);
    let n = list.len();
    for (i, st) in list.into_iter().enumerate() {
        let stop = st.start + st.duration;
        let until = if i + 1 == n { f64::INFINITY } else { stop };
        if st.amplitude == 0.0 || !rule.depends_on_state() {
            let s = drive_strength(rule, effective_weight(&state), st.amplitude);
            let from = state.clone();
            pending(
                &|t| Ok(effective_weight(&p.evolve_driven(&from, s, (t - st.start).max(0.0))?)),
                until,
                &mut idx,
                &mut out,
            )?;
            state = p.evolve_driven(&from, s, st.duration)?;
        } else {
            let h = st.duration / crate::chain::SOFT_BOUND_SUBSTEPS as f64;
            for k in 0..crate::chain::SOFT_BOUND_SUBSTEPS {
                let sub_start = st.start + k as f64 * h;
                let s = drive_strength(rule, effective_weight(&state), st.amplitude);
                let from = state.clone();
                let last = k + 1 == crate::chain::SOFT_BOUND_SUBSTEPS;
                let sub_until = if last { until } else { sub_start + h };
                pending(
                    &|t| Ok(effective_weight(&p.evolve_driven(&from, s, (t - sub_start).max(0.0))?)),
                    sub_until,
                    &mut idx,
                    &mut out,
                )?;
                state = p.evolve_driven(&from, s, h)?;
            }
        }
        state.time = stop;
    }
    // protocol with no stretches: everything is the initial state
    while idx < times.len() {
        out.push(effective_weight(&state));
        idx += 1;
    }
    Ok(out)
}

/// Drives a single phase; exposed for callers composing their own protocols.
pub fn drive_single_phase(
    p: &Propagator,
    state: &ChainState,
    rule: &DriveRule,
    amplitude: f64,
    duration: f64,
) -> Result<ChainState> {
    drive_phase(p, state.clone(), rule, amplitude, state.time, duration, 1, |_, _| Ok(()))
}
