//! Coupled-beaker synapse chains.
//!
//! A chain of `K` compartments with capacities `C_k` and nearest-neighbour
//! conductances `g_{k,k+1}` obeys `C du/dt = G u + (s, 0, .., 0)^T`, where
//! `G` is the tridiagonal coupling matrix and `s` the write drive injected into
//! the first compartment. With `v = C^{1/2} u` the operator becomes the
//! symmetric `H = C^{-1/2} G C^{-1/2} = E diag(lambda) E^T`, so every evolution
//! is a diagonal update in the modal coordinates `E^T v`.

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, EigenDecomposition, SymmetricMatrix};
use crate::protocol::{Phase, PulseSchedule, TraceSample, WeightTrace};

/// Voltage-to-rate calibration: a 1 V, 0.5 s write moves an isolated unit
/// capacity by exactly one weight unit.
pub const CALIBRATED_BASE_RATE: f64 = 2.0;

/// Sub-steps per on-phase when the drive depends on the state.
pub const SOFT_BOUND_SUBSTEPS: usize = 1000;

/// Relative threshold below which an eigenvalue is treated as the
/// conserved mode.
pub const ZERO_MODE_RTOL: f64 = 1e-9;

/// Capacities and couplings of one chain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawChainConfig")]
pub struct ChainConfig {
    capacities: Vec<f64>,
    couplings: Vec<f64>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainConfig {
    capacities: Vec<f64>,
    #[serde(default)]
    couplings: Vec<f64>,
}

impl TryFrom<RawChainConfig> for ChainConfig {
    type Error = Error;

    fn try_from(raw: RawChainConfig) -> Result<Self> {
        ChainConfig::new(raw.capacities, raw.couplings)
    }
}

impl ChainConfig {
    pub fn new(capacities: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if capacities.is_empty() {
            return Err(Error::invalid("a chain needs at least one compartment"));
        }
        if couplings.len() + 1 != capacities.len() {
            return Err(Error::invalid(format!(
                "{} compartments need {} couplings, got {}",
                capacities.len(),
                capacities.len() - 1,
                couplings.len()
            )));
        }
        if let Some(c) = capacities.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::invalid(format!("capacity {c} is not a positive finite number")));
        }
        if let Some(g) = couplings.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::invalid(format!("coupling {g} is not a positive finite number")));
        }
        Ok(Self { capacities, couplings })
    }

    /// A single compartment of unit capacity.
    pub fn simple() -> Self {
        Self {
            capacities: vec![1.0],
            couplings: vec![],
        }
    }

    /// The first `k` compartments of this chain.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!("cannot truncate a {}-chain to {k}", self.len())));
        }
        Self::new(self.capacities[..k].to_vec(), self.couplings[..k - 1].to_vec())
    }

    /// Same capacities, every coupling multiplied by `factor`.
    pub fn with_coupling_scale(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.capacities.clone(),
            self.couplings.iter().map(|g| g * factor).collect(),
        )
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacities.iter().sum()
    }

    /// `sum_k C_k u_k`, conserved by free evolution.
    pub fn conserved_quantity(&self, u: &[f64]) -> f64 {
        self.capacities.iter().zip(u).map(|(c, x)| c * x).sum()
    }
}

/// Compartment levels at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub u: Vec<f64>,
    pub time: f64,
}

impl ChainState {
    pub fn zeros(k: usize) -> Self {
        Self {
            u: vec![0.0; k],
            time: 0.0,
        }
    }

    pub fn new(u: Vec<f64>, time: f64) -> Self {
        Self { u, time }
    }
}

/// Visible synaptic weight: the level of the first compartment.
#[inline]
pub fn effective_weight(state: &ChainState) -> f64 {
    state.u.first().copied().unwrap_or(0.0)
}

/// Tridiagonal `G` with zero row sums.
pub fn build_coupling_matrix(config: &ChainConfig) -> SymmetricMatrix {
    let k = config.len();
    let g = config.couplings();
    SymmetricMatrix::from_upper(k, |i, j| {
        if i == j {
            let left = if i > 0 { g[i - 1] } else { 0.0 };
            let right = if i + 1 < k { g[i] } else { 0.0 };
            -(left + right)
        } else if j == i + 1 {
            g[i]
        } else {
            0.0
        }
    })
    .expect("validated chain config yields a finite symmetric matrix")
}

/// Exact evolution operator for one chain configuration.
///
/// Immutable once built, so a single instance can be shared by any number of
/// states and threads.
#[derive(Debug, Clone)]
pub struct Propagator {
    config: ChainConfig,
    eig: EigenDecomposition,
    sqrt_c: Vec<f64>,
    inv_sqrt_c: Vec<f64>,
    zero_mode: Vec<bool>,
}

pub fn build_propagator(config: &ChainConfig) -> Result<Propagator> {
    Propagator::new(config)
}

impl Propagator {
    pub fn new(config: &ChainConfig) -> Result<Self> {
        let g = build_coupling_matrix(config);
        let sqrt_c: Vec<f64> = config.capacities().iter().map(|c| c.sqrt()).collect();
        let inv_sqrt_c: Vec<f64> = sqrt_c.iter().map(|s| 1.0 / s).collect();
        let k = config.len();
        let h = SymmetricMatrix::from_upper(k, |i, j| g.get(i, j) * inv_sqrt_c[i] * inv_sqrt_c[j])?;
        let eig = eig_sym(&h)?;

        let scale = eig.values().iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let zero_mode: Vec<bool> = eig
            .values()
            .iter()
            .map(|l| scale == 0.0 || l.abs() < ZERO_MODE_RTOL * scale)
            .collect();
        let zeros = zero_mode.iter().filter(|z| **z).count();
        if zeros != 1 {
            return Err(Error::NumericalFailure(format!(
                "expected exactly one conserved mode, found {zeros}"
            )));
        }
        if let Some(l) = eig
            .values()
            .iter()
            .zip(&zero_mode)
            .find(|(l, z)| !**z && **l >= 0.0)
        {
            return Err(Error::NumericalFailure(format!("non-negative relaxation rate {}", l.0)));
        }

        Ok(Self {
            config: config.clone(),
            eig,
            sqrt_c,
            inv_sqrt_c,
            zero_mode,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Eigenvalues of `H`, ascending (all `<= 0`).
    pub fn eigenvalues(&self) -> &[f64] {
        self.eig.values()
    }

    pub fn decomposition(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn is_zero_mode(&self, i: usize) -> bool {
        self.zero_mode[i]
    }

    fn check(&self, state: &ChainState, dt: f64) -> Result<()> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step {dt} must be finite and non-negative")));
        }
        if state.u.len() != self.len() {
            return Err(Error::invalid(format!(
                "state has {} levels, chain has {} compartments",
                state.u.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `E^T C^{1/2} u`
    fn project_modes(&self, u: &[f64]) -> Vec<f64> {
        let k = self.len();
        (0..k)
            .map(|i| (0..k).map(|r| self.eig.vector_component(r, i) * self.sqrt_c[r] * u[r]).sum())
            .collect()
    }

    /// `C^{-1/2} E w`
    fn levels_from_modes(&self, w: &[f64]) -> Vec<f64> {
        let k = self.len();
        (0..k)
            .map(|r| self.inv_sqrt_c[r] * (0..k).map(|i| self.eig.vector_component(r, i) * w[i]).sum::<f64>())
            .collect()
    }

    /// Homogeneous evolution over `dt` seconds.
    pub fn evolve_free(&self, state: &ChainState, dt: f64) -> Result<ChainState> {
        self.check(state, dt)?;
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let mut w = self.project_modes(&state.u);
        for (wi, l) in w.iter_mut().zip(self.eig.values()) {
            *wi *= (l * dt).exp();
        }
        Ok(ChainState {
            u: self.levels_from_modes(&w),
            time: state.time + dt,
        })
    }

    /// Evolution over `dt` seconds with a constant drive `s` into the first
    /// compartment.
    pub fn evolve_driven(&self, state: &ChainState, s: f64, dt: f64) -> Result<ChainState> {
        self.check(state, dt)?;
        if !s.is_finite() {
            return Err(Error::invalid(format!("drive {s} is not finite")));
        }
        if s == 0.0 {
            return self.evolve_free(state, dt);
        }
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let inject = s * self.inv_sqrt_c[0];
        let mut w = self.project_modes(&state.u);
        for (i, wi) in w.iter_mut().enumerate() {
            let b = self.eig.vector_component(0, i) * inject;
            if self.zero_mode[i] {
                *wi += b * dt;
            } else {
                let l = self.eig.values()[i];
                *wi = *wi * (l * dt).exp() + b * (l * dt).exp_m1() / l;
            }
        }
        Ok(ChainState {
            u: self.levels_from_modes(&w),
            time: state.time + dt,
        })
    }

    /// Row-major `K x K` matrix `M` with `u(t + dt) = M u(t)` under free
    /// evolution.
    pub fn transition_matrix(&self, dt: f64) -> Vec<f64> {
        let k = self.len();
        let decay: Vec<f64> = self.eig.values().iter().map(|l| (l * dt).exp()).collect();
        let mut m = vec![0.0; k * k];
        for r in 0..k {
            for c in 0..k {
                let s: f64 = (0..k)
                    .map(|i| self.eig.vector_component(r, i) * decay[i] * self.eig.vector_component(c, i))
                    .sum();
                m[r * k + c] = self.inv_sqrt_c[r] * s * self.sqrt_c[c];
            }
        }
        m
    }

    /// `1/|lambda|` for the slowest non-conserved mode.
    pub fn slowest_timescale(&self) -> Result<f64> {
        self.eig
            .values()
            .iter()
            .zip(&self.zero_mode)
            .filter(|(_, z)| !**z)
            .map(|(l, _)| l.abs())
            .min_by(f64::total_cmp)
            .map(|l| 1.0 / l)
            .ok_or_else(|| Error::invalid("a single compartment has no relaxation mode"))
    }
}

pub fn evolve_free(p: &Propagator, state: &ChainState, dt: f64) -> Result<ChainState> {
    p.evolve_free(state, dt)
}

pub fn evolve_driven(p: &Propagator, state: &ChainState, s: f64, dt: f64) -> Result<ChainState> {
    p.evolve_driven(state, s, dt)
}

pub fn slowest_timescale(p: &Propagator) -> Result<f64> {
    p.slowest_timescale()
}

/// How the write voltage maps onto the drive `s`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DriveRule {
    /// `s = base_rate * volts`.
    Constant { base_rate: f64 },
    /// Constant drive scaled linearly toward zero at the bound the drive
    /// pushes toward.
    SoftBounded { base_rate: f64, u_min: f64, u_max: f64 },
}

impl Default for DriveRule {
    fn default() -> Self {
        DriveRule::Constant {
            base_rate: CALIBRATED_BASE_RATE,
        }
    }
}

impl DriveRule {
    pub fn constant(base_rate: f64) -> Result<Self> {
        let rule = DriveRule::Constant { base_rate };
        rule.validate()?;
        Ok(rule)
    }

    pub fn soft_bounded(base_rate: f64, u_min: f64, u_max: f64) -> Result<Self> {
        let rule = DriveRule::SoftBounded { base_rate, u_min, u_max };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DriveRule::Constant { base_rate } => {
                if !base_rate.is_finite() {
                    return Err(Error::invalid("base rate must be finite"));
                }
            }
            DriveRule::SoftBounded { base_rate, u_min, u_max } => {
                if !base_rate.is_finite() || !u_min.is_finite() || !u_max.is_finite() {
                    return Err(Error::invalid("drive rule parameters must be finite"));
                }
                if u_min >= u_max {
                    return Err(Error::invalid(format!("soft bounds need u_min < u_max, got [{u_min}, {u_max}]")));
                }
            }
        }
        Ok(())
    }

    pub fn base_rate(&self) -> f64 {
        match *self {
            DriveRule::Constant { base_rate } | DriveRule::SoftBounded { base_rate, .. } => base_rate,
        }
    }

    pub fn with_base_rate(self, base_rate: f64) -> Self {
        match self {
            DriveRule::Constant { .. } => DriveRule::Constant { base_rate },
            DriveRule::SoftBounded { u_min, u_max, .. } => DriveRule::SoftBounded { base_rate, u_min, u_max },
        }
    }

    pub fn depends_on_state(&self) -> bool {
        matches!(self, DriveRule::SoftBounded { .. })
    }
}

/// Drive `s` for a write of `amplitude_volts` when the visible weight is `u1`.
///
/// Outside the soft bounds the scale factor saturates to `[0, 1]`, so a
/// weight already past the bound it is driven toward receives no drive.
pub fn drive_strength(rule: &DriveRule, u1: f64, amplitude_volts: f64) -> f64 {
    match *rule {
        DriveRule::Constant { base_rate } => base_rate * amplitude_volts,
        DriveRule::SoftBounded { base_rate, u_min, u_max } => {
            let linear = base_rate * amplitude_volts;
            let range = u_max - u_min;
            let room = if amplitude_volts > 0.0 {
                (u_max - u1) / range
            } else if amplitude_volts < 0.0 {
                (u1 - u_min) / range
            } else {
                return 0.0;
            };
            linear * room.clamp(0.0, 1.0)
        }
    }
}

/// Sampling knobs for pulse trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Evenly spaced samples per on or off phase; the last one falls on the
    /// phase boundary.
    pub samples_per_phase: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { samples_per_phase: 1 }
    }
}

/// Drives one phase of `duration` seconds with `amplitude` volts, pushing
/// `samples` evenly spaced samples (the last at the phase end).
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive_phase(
    p: &Propagator,
    state: ChainState,
    rule: &DriveRule,
    amplitude: f64,
    start: f64,
    duration: f64,
    samples: usize,
    mut on_sample: impl FnMut(&ChainState, usize) -> Result<()>,
) -> Result<ChainState> {
    let samples = samples.max(1);
    let mut state = state;
    if amplitude == 0.0 || !rule.depends_on_state() {
        let s = drive_strength(rule, effective_weight(&state), amplitude);
        for j in 1..=samples {
            let t = start + duration * j as f64 / samples as f64;
            let dt = (t - state.time).max(0.0);
            state = p.evolve_driven(&state, s, dt)?;
            state.time = t;
            on_sample(&state, j)?;
        }
        return Ok(state);
    }

    let h = duration / SOFT_BOUND_SUBSTEPS as f64;
    let mut next = 1;
    for step in 1..=SOFT_BOUND_SUBSTEPS {
        let s = drive_strength(rule, effective_weight(&state), amplitude);
        state = p.evolve_driven(&state, s, h)?;
        state.time = start + h * step as f64;
        while next <= samples && step * samples >= next * SOFT_BOUND_SUBSTEPS {
            on_sample(&state, next)?;
            next += 1;
        }
    }
    state.time = start + duration;
    Ok(state)
}

/// Applies `schedule` starting from `state`, appending boundary samples to
/// `trace`. Pulse indices continue from `first_pulse`.
pub(crate) fn drive_train(
    p: &Propagator,
    state: ChainState,
    schedule: &PulseSchedule,
    rule: &DriveRule,
    opts: TraceOptions,
    first_pulse: u32,
    trace: &mut WeightTrace,
) -> Result<ChainState> {
    schedule.validate()?;
    let t0 = state.time;
    let period = schedule.period();
    let mut state = state;
    for n in 0..schedule.count {
        let pulse = first_pulse + n;
        let start = t0 + n as f64 * period;
        let on_end = t0 + (n as f64 + schedule.on_fraction) * period;
        let off_end = t0 + (n as f64 + 1.0) * period;
        state = drive_phase(
            p,
            state,
            rule,
            schedule.amplitude,
            start,
            on_end - start,
            opts.samples_per_phase,
            |s, _| trace.push(TraceSample::new(s, pulse, Phase::On)),
        )?;
        if off_end > on_end {
            state = drive_phase(p, state, rule, 0.0, on_end, off_end - on_end, opts.samples_per_phase, |s, _| {
                trace.push(TraceSample::new(s, pulse, Phase::Off))
            })?;
        }
        state.time = off_end;
    }
    Ok(state)
}

/// Runs a pulse train from `state` and returns the sampled trace, starting
/// with the initial state.
pub fn apply_pulse_train(
    p: &Propagator,
    state: &ChainState,
    schedule: &PulseSchedule,
    rule: &DriveRule,
) -> Result<WeightTrace> {
    apply_pulse_train_with(p, state, schedule, rule, TraceOptions::default())
}

pub fn apply_pulse_train_with(
    p: &Propagator,
    state: &ChainState,
    schedule: &PulseSchedule,
    rule: &DriveRule,
    opts: TraceOptions,
) -> Result<WeightTrace> {
    rule.validate()?;
    let mut trace = WeightTrace::new();
    trace.push(TraceSample::new(state, 0, Phase::Initial))?;
    drive_train(p, state.clone(), schedule, rule, opts, 1, &mut trace)?;
    Ok(trace)
}
