use rand::Rng;

use crate::chain::{ChainConfig, Propagator};
use crate::error::{Error, Result};

/// Anything that can drive the per-synapse state of a [`SynapticArray`]:
/// a linear map applied to every synapse between presentations.
pub trait SynapseDynamics {
    /// Number of internal variables per synapse.
    fn levels(&self) -> usize;
    /// Row-major `levels x levels` map advancing one synapse by `dt` seconds.
    fn step_matrix(&self, dt: f64) -> Vec<f64>;
    /// Whether the visible weight is clipped after writes.
    fn bounded(&self) -> bool {
        true
    }
}

impl SynapseDynamics for Propagator {
    fn levels(&self) -> usize {
        self.len()
    }

    fn step_matrix(&self, dt: f64) -> Vec<f64> {
        self.transition_matrix(dt)
    }
}

/// A single-variable synapse with exponential leak, `du/dt = -u / tau + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakySynapse {
    pub tau: f64,
}

impl LeakySynapse {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("leak time constant {tau} must be positive")));
        }
        Ok(Self { tau })
    }
}

impl SynapseDynamics for LeakySynapse {
    fn levels(&self) -> usize {
        1
    }

    fn step_matrix(&self, dt: f64) -> Vec<f64> {
        vec![(-dt / self.tau).exp()]
    }

    /// The leak alone limits the weight.
    fn bounded(&self) -> bool {
        false
    }
}

/// Leaky simple synapse whose time constant is the slowest relaxation time
/// of `config`.
pub fn matched_simple(config: &ChainConfig) -> Result<LeakySynapse> {
    if config.len() < 2 {
        return Err(Error::invalid("a matched simple model needs a chain of at least two compartments"));
    }
    LeakySynapse::new(Propagator::new(config)?.slowest_timescale()?)
}

/// `N` neurons fully connected by chain synapses: `N (N - 1)` weights plus
/// `N` biases, all evolving under one shared map.
#[derive(Debug, Clone)]
pub struct SynapticArray {
    n: usize,
    levels: usize,
    /// `levels[k][s]`: level `k` of synapse `s`; weights at `i * n + j`,
    /// bias `i` at `n * n + i`.
    state: Vec<Vec<f64>>,
    step: Vec<f64>,
    identity_step: bool,
    q: f64,
    bound: Option<f64>,
    scratch: Vec<f64>,
}

impl SynapticArray {
    /// `bound` clips the visible weight to `[-bound, bound]` after each write
    /// unless the dynamics opt out.
    pub fn new(
        n: usize,
        dynamics: &dyn SynapseDynamics,
        q: f64,
        step_time: f64,
        bound: Option<f64>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("an array needs at least two neurons"));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("learning rate {q} must lie in [0, 1]")));
        }
        if !(step_time >= 0.0 && step_time.is_finite()) {
            return Err(Error::invalid(format!("step time {step_time} must be non-negative")));
        }
        if let Some(b) = bound {
            if !(b > 0.0) {
                return Err(Error::invalid(format!("weight bound {b} must be positive")));
            }
        }
        let levels = dynamics.levels();
        let step = dynamics.step_matrix(step_time);
        let identity_step = (0..levels).all(|r| (0..levels).all(|c| step[r * levels + c] == if r == c { 1.0 } else { 0.0 }));
        let synapses = n * n + n;
        Ok(Self {
            n,
            levels,
            state: vec![vec![0.0; synapses]; levels],
            step,
            identity_step,
            q,
            bound: if dynamics.bounded() { bound } else { None },
            scratch: vec![0.0; levels],
        })
    }

    pub fn neurons(&self) -> usize {
        self.n
    }

    /// Weights plus biases.
    pub fn synapse_count(&self) -> usize {
        self.n * (self.n - 1) + self.n
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.state[0][i * self.n + j]
    }

    #[inline]
    pub fn bias(&self, i: usize) -> f64 {
        self.state[0][self.n * self.n + i]
    }

    /// Visible weights of all synapses, diagonal slots included.
    pub fn visible(&self) -> &[f64] {
        &self.state[0]
    }

    /// Multiplies every level of every synapse by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for level in &mut self.state {
            level.iter_mut().for_each(|x| *x *= factor);
        }
    }

    fn check(&self, x: &[i8]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::invalid(format!("pattern length {} does not match {} neurons", x.len(), self.n)));
        }
        Ok(())
    }

    #[inline]
    fn write(&mut self, s: usize, delta: f64) {
        let u = &mut self.state[0][s];
        *u += delta;
        if let Some(b) = self.bound {
            *u = u.clamp(-b, b);
        }
    }

    /// One Hebbian presentation: each synapse independently accepts its
    /// update `x_i x_j` (bias: `x_i`) with probability `q`, then every
    /// synapse advances by one step.
    pub fn present(&mut self, x: &[i8], rng: &mut impl Rng) -> Result<()> {
        self.check(x)?;
        let n = self.n;
        let all = self.q >= 1.0;
        for i in 0..n {
            let xi = x[i] as f64;
            for j in 0..n {
                if j == i {
                    continue;
                }
                if all || rng.random::<f64>() < self.q {
                    self.write(i * n + j, xi * x[j] as f64);
                }
            }
            if all || rng.random::<f64>() < self.q {
                self.write(n * n + i, xi);
            }
        }
        self.advance();
        Ok(())
    }

    /// Applies the shared one-step map to every synapse.
    pub fn advance(&mut self) {
        if self.identity_step {
            return;
        }
        let k = self.levels;
        let synapses = self.state[0].len();
        if k == 1 {
            let a = self.step[0];
            self.state[0].iter_mut().for_each(|u| *u *= a);
            return;
        }
        for s in 0..synapses {
            for r in 0..k {
                self.scratch[r] = (0..k).map(|c| self.step[r * k + c] * self.state[c][s]).sum();
            }
            for r in 0..k {
                self.state[r][s] = self.scratch[r];
            }
        }
    }

    /// Local fields `b_i + sum_{j != i} w_ij x_j`.
    fn fields(&self, x: &[i8]) -> Vec<f64> {
        let n = self.n;
        let u = &self.state[0];
        let xf: Vec<f64> = x.iter().map(|v| *v as f64).collect();
        (0..n)
            .map(|i| {
                let row = &u[i * n..(i + 1) * n];
                let full: f64 = row.iter().zip(&xf).map(|(w, xj)| w * xj).sum();
                full - row[i] * xf[i] + u[n * n + i]
            })
            .collect()
    }

    /// `y_i = sign(b_i + sum_{j != i} w_ij x_j)` with `sign(0) = +1`.
    pub fn recall(&self, x: &[i8]) -> Result<Vec<i8>> {
        self.check(x)?;
        Ok(self.fields(x).into_iter().map(|h| if h >= 0.0 { 1 } else { -1 }).collect())
    }

    /// Hamming distance between `x` and its one-step recall.
    pub fn recall_distance(&self, x: &[i8]) -> Result<usize> {
        Ok(self.recall(x)?.iter().zip(x).filter(|(a, b)| a != b).count())
    }

    /// `(1 / N_syn) sum Δw · u1` for the Hebbian update of `x`.
    pub fn overlap(&self, x: &[i8]) -> Result<f64> {
        self.check(x)?;
        let total: f64 = self.fields(x).iter().zip(x).map(|(h, xi)| h * *xi as f64).sum();
        Ok(total / self.synapse_count() as f64)
    }

    /// Recall distance and overlap from one pass over the weights.
    pub fn probe(&self, x: &[i8]) -> Result<(usize, f64)> {
        self.check(x)?;
        let h = self.fields(x);
        let distance = h.iter().zip(x).filter(|(h, xi)| (if **h >= 0.0 { 1 } else { -1 }) != **xi).count();
        let total: f64 = h.iter().zip(x).map(|(h, xi)| h * *xi as f64).sum();
        Ok((distance, total / self.synapse_count() as f64))
    }
}
