//! Explicit forward-Euler integration of a chain, used to cross-check the
//! analytic propagator.

use crate::chain::{build_coupling_matrix, ChainConfig, ChainState, Propagator};
use crate::error::{Error, Result};

/// Integrates `C du/dt = G u + (s(t), 0, ..)` with fixed steps of `step`
/// seconds over `horizon` seconds. The drive is sampled at each step's
/// midpoint, measured from `state.time`; a shorter final step covers any
/// remainder.
pub fn euler_oracle(
    config: &ChainConfig,
    state: &ChainState,
    drive: impl Fn(f64) -> f64,
    step: f64,
    horizon: f64,
) -> Result<ChainState> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step {step} must be positive")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon {horizon} must be non-negative")));
    }
    let k = config.len();
    if state.u.len() != k {
        return Err(Error::invalid("state length does not match the chain"));
    }
    let fastest = Propagator::new(config)?
        .eigenvalues()
        .iter()
        .fold(0.0f64, |m, l| m.max(l.abs()));
    if fastest > 0.0 && step >= 2.0 / fastest {
        return Err(Error::invalid(format!(
            "step {step} is at or above the stability bound {}",
            2.0 / fastest
        )));
    }

    let g = build_coupling_matrix(config);
    let c = config.capacities();
    let mut u = state.u.clone();
    let mut du = vec![0.0; k];
    let full = (horizon / step).floor() as u64;
    let rest = horizon - full as f64 * step;
    let mut advance = |u: &mut Vec<f64>, t: f64, h: f64| {
        let s = drive(t + 0.5 * h);
        for i in 0..k {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(k - 1);
            let mut flux: f64 = (lo..=hi).map(|j| g.get(i, j) * u[j]).sum();
            if i == 0 {
                flux += s;
            }
            du[i] = h * flux / c[i];
        }
        for (x, d) in u.iter_mut().zip(&du) {
            *x += d;
        }
    };
    for n in 0..full {
        advance(&mut u, n as f64 * step, step);
    }
    if rest > 1e-12 * step {
        advance(&mut u, full as f64 * step, rest);
    }
    Ok(ChainState::new(u, state.time + horizon))
}
