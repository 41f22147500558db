//! Least-squares extraction of chain parameters from visible-weight traces.
//!
//! Unknowns are searched in log2 space: a coarse grid locates the basin, a
//! box-constrained Nelder-Mead simplex refines it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, ChainState, DriveRule, Propagator};
use crate::error::{Error, Result};
use crate::protocol::{protocol_duration, sample_protocol, Segment, WeightTrace};

pub const GRID_POINTS: usize = 17;
/// Largest number of unknowns searched on a joint grid.
pub const JOINT_GRID_MAX: usize = 3;
pub const SIMPLEX_TOLERANCE: f64 = 1e-3;
pub const MAX_EVALUATIONS: usize = 500;
/// Residual spread along a grid axis below which the unknown is declared
/// unobservable.
pub const FLATNESS_TOLERANCE: f64 = 1e-12;

/// A free parameter of the model, fitted as `log2` of its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "kebab-case")]
pub enum Unknown {
    /// `g_{i+1,i+2}` (zero-based coupling index).
    Coupling(usize),
    /// `C_{i+1}` (zero-based compartment index).
    Capacity(usize),
    BaseRate,
}

impl std::fmt::Display for Unknown {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Unknown::Coupling(i) => write!(f, "g{}{}", i + 1, i + 2),
            Unknown::Capacity(i) => write!(f, "C{}", i + 1),
            Unknown::BaseRate => f.write_str("s0"),
        }
    }
}

/// An unknown together with its `log2` search interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub unknown: Unknown,
    pub lower: f64,
    pub upper: f64,
}

impl FitParameter {
    pub fn new(unknown: Unknown, lower: f64, upper: f64) -> Self {
        Self { unknown, lower, upper }
    }

    fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    times: Vec<f64>,
    observed: Vec<f64>,
    segments: Vec<Segment>,
    template: ChainConfig,
    parameters: Vec<FitParameter>,
    rule: DriveRule,
}

impl FitProblem {
    /// `observed` holds the measured trace (only `u1` is used), with times
    /// measured from the start of `segments`, which begin with the chain at
    /// rest.
    pub fn new(
        observed: &WeightTrace,
        segments: Vec<Segment>,
        template: ChainConfig,
        parameters: Vec<FitParameter>,
        rule: DriveRule,
    ) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::invalid("at least one unknown is required"));
        }
        for (i, p) in parameters.iter().enumerate() {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(Error::invalid(format!("bounds for {} must be finite with lower < upper", p.unknown)));
            }
            let in_range = match p.unknown {
                Unknown::Coupling(k) => k + 1 < template.len(),
                Unknown::Capacity(k) => k < template.len(),
                Unknown::BaseRate => true,
            };
            if !in_range {
                return Err(Error::invalid(format!("{} does not exist in a {}-chain", p.unknown, template.len())));
            }
            if parameters[..i].iter().any(|q| q.unknown == p.unknown) {
                return Err(Error::invalid(format!("{} listed twice", p.unknown)));
            }
        }
        rule.validate()?;
        if observed.is_empty() {
            return Err(Error::invalid("observed trace is empty"));
        }
        if segments.is_empty() {
            return Err(Error::invalid("the protocol has no segments"));
        }
        let times = observed.times();
        let horizon = protocol_duration(&segments);
        if times[0] < 0.0 || *times.last().unwrap() > horizon * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid(format!(
                "observed times must lie within the protocol horizon [0, {horizon}]"
            )));
        }
        // reject malformed segments up front
        sample_protocol(
            &Propagator::new(&template)?,
            &rule,
            &segments,
            &ChainState::zeros(template.len()),
            &[],
        )?;
        Ok(Self {
            times,
            observed: observed.u1(),
            segments,
            template,
            parameters,
            rule,
        })
    }

    pub fn parameters(&self) -> &[FitParameter] {
        &self.parameters
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    /// Chain and drive rule for a candidate in `log2` units.
    pub fn model(&self, candidate: &[f64]) -> Result<(ChainConfig, DriveRule)> {
        if candidate.len() != self.parameters.len() {
            return Err(Error::invalid(format!(
                "expected {} candidate values, got {}",
                self.parameters.len(),
                candidate.len()
            )));
        }
        let mut caps = self.template.capacities().to_vec();
        let mut gs = self.template.couplings().to_vec();
        let mut rule = self.rule;
        for (p, &v) in self.parameters.iter().zip(candidate) {
            let value = v.exp2();
            match p.unknown {
                Unknown::Coupling(k) => gs[k] = value,
                Unknown::Capacity(k) => caps[k] = value,
                Unknown::BaseRate => rule = rule.with_base_rate(value),
            }
        }
        Ok((ChainConfig::new(caps, gs)?, rule))
    }

    /// Simulated `u1` at the observed sample times.
    pub fn simulate(&self, candidate: &[f64]) -> Result<Vec<f64>> {
        let (config, rule) = self.model(candidate)?;
        let p = Propagator::new(&config)?;
        sample_protocol(&p, &rule, &self.segments, &ChainState::zeros(config.len()), &self.times)
    }
}

/// Root-mean-square difference between observed and simulated `u1`.
pub fn residual(problem: &FitProblem, candidate: &[f64]) -> Result<f64> {
    let sim = problem.simulate(candidate)?;
    let sum: f64 = sim.iter().zip(&problem.observed).map(|(s, o)| (s - o) * (s - o)).sum();
    let rms = (sum / sim.len() as f64).sqrt();
    if rms.is_finite() {
        Ok(rms)
    } else {
        Err(Error::NumericalFailure(format!("non-finite residual at {candidate:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub unknowns: Vec<Unknown>,
    /// `log2` estimates in the order of the problem's parameters.
    pub estimates: Vec<f64>,
    pub residual: f64,
    /// Nelder-Mead iterations after the grid stage.
    pub iterations: usize,
    /// Residual evaluations across both stages.
    pub evaluations: usize,
}

fn grid_axis(p: &FitParameter) -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| p.lower + p.width() * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn check_flat(values: &[f64], unknown: Unknown) -> Result<()> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if hi - lo <= FLATNESS_TOLERANCE {
        Err(Error::Unidentifiable(format!("residual does not depend on {unknown}")))
    } else {
        Ok(())
    }
}

fn evaluate_all(problem: &FitProblem, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.par_iter().map(|x| residual(problem, x)).collect()
}

/// Grid search followed by Nelder-Mead refinement.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    let params = problem.parameters();
    let n = params.len();
    let axes: Vec<Vec<f64>> = params.iter().map(grid_axis).collect();
    let mut evaluations = 0;

    let (mut best_x, mut best_r) = if n <= JOINT_GRID_MAX {
        let total = GRID_POINTS.pow(n as u32);
        let points: Vec<Vec<f64>> = (0..total)
            .map(|mut idx| {
                let mut x = vec![0.0; n];
                for d in (0..n).rev() {
                    x[d] = axes[d][idx % GRID_POINTS];
                    idx /= GRID_POINTS;
                }
                x
            })
            .collect();
        let values = evaluate_all(problem, &points)?;
        evaluations += total;
        let b = argmin(&values);
        // flatness along each axis through the best grid point
        for d in 0..n {
            let stride = GRID_POINTS.pow((n - 1 - d) as u32);
            let pos = (b / stride) % GRID_POINTS;
            let base = b - pos * stride;
            let line: Vec<f64> = (0..GRID_POINTS).map(|i| values[base + i * stride]).collect();
            check_flat(&line, params[d].unknown)?;
        }
        (points[b].clone(), values[b])
    } else {
        let mut x: Vec<f64> = params.iter().map(|p| 0.5 * (p.lower + p.upper)).collect();
        let mut r = residual(problem, &x)?;
        evaluations += 1;
        for d in 0..n {
            let points: Vec<Vec<f64>> = axes[d]
                .iter()
                .map(|&v| {
                    let mut y = x.clone();
                    y[d] = v;
                    y
                })
                .collect();
            let values = evaluate_all(problem, &points)?;
            evaluations += GRID_POINTS;
            check_flat(&values, params[d].unknown)?;
            let b = argmin(&values);
            if values[b] < r {
                r = values[b];
                x = points[b].clone();
            }
        }
        (x, r)
    };

    let (x, r, iterations, used) = nelder_mead(problem, &best_x, best_r)?;
    evaluations += used;
    if r < best_r {
        best_x = x;
        best_r = r;
    }
    Ok(FitResult {
        unknowns: params.iter().map(|p| p.unknown).collect(),
        estimates: best_x,
        residual: best_r,
        iterations,
        evaluations,
    })
}

fn clamp_into(problem: &FitProblem, x: &mut [f64]) {
    for (v, p) in x.iter_mut().zip(problem.parameters()) {
        *v = v.clamp(p.lower, p.upper);
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let dist = a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) with trial points clamped into the bounds box.
fn nelder_mead(problem: &FitProblem, start: &[f64], start_r: f64) -> Result<(Vec<f64>, f64, usize, usize)> {
    let params = problem.parameters();
    let n = start.len();
    let mut evals = 0;
    let eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        residual(problem, x)
    };

    let mut simplex = vec![(start.to_vec(), start_r)];
    for d in 0..n {
        let step = params[d].width() / (GRID_POINTS - 1) as f64;
        let mut x = start.to_vec();
        x[d] = if x[d] + step <= params[d].upper { x[d] + step } else { x[d] - step };
        let r = eval(&x, &mut evals)?;
        simplex.push((x, r));
    }

    let mut iterations = 0;
    while evals < MAX_EVALUATIONS && diameter(&simplex) >= SIMPLEX_TOLERANCE {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v.0[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
            clamp_into(problem, &mut x);
            x
        };

        let xr = along(1.0);
        let rr = eval(&xr, &mut evals)?;
        if rr < simplex[0].1 {
            let xe = along(2.0);
            let re = eval(&xe, &mut evals)?;
            simplex[n] = if re < rr { (xe, re) } else { (xr, rr) };
        } else if rr < simplex[n - 1].1 {
            simplex[n] = (xr, rr);
        } else {
            let (xc, rc) = if rr < worst.1 {
                let x = along(0.5);
                let r = eval(&x, &mut evals)?;
                (x, r)
            } else {
                let x = along(-0.5);
                let r = eval(&x, &mut evals)?;
                (x, r)
            };
            if rc < worst.1.min(rr) {
                simplex[n] = (xc, rc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, y)| b + 0.5 * (y - b)).collect();
                    let r = eval(&x, &mut evals)?;
                    *v = (x, r);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, r) = simplex.swap_remove(0);
    Ok((x, r, iterations, evals))
}
