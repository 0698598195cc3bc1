//! Radon-Nikodym weights along simulated paths and ensemble estimators.
//!
//! The change of measure that turns the nonlinear system into the linear
//! one has, along a nonlinear path with increments dW,
//!
//! ```text
//! log dP~/dP = -sum_j int X_par(j) dW_j - 1/2 int sum_j X_par(j)^2 ds
//! ```
//!
//! with the root using the frozen phantom intensity f. Along a *linear*
//! path (increments playing the role of dB) the density toward the
//! nonlinear law flips the sign of the stochastic integral:
//! `+sum int X_par dB - 1/2 int sum X_par^2 ds`. Either way the weight
//! converts expectations under the path's own law into the other law's,
//! and has mean one. Stochastic integrals use left-point quadrature,
//! matching both the Ito integral and the Euler-Maruyama order.

use crate::dynamics::ShellModel;
use crate::error::{Error, Result};
use crate::parallel::{mean_se, pairwise_sum};
use crate::sde::{PathEnsemble, StochPath};
use crate::state::energy;

/// Log-weight toward the other law, recomputed from a fully recorded path.
/// Matches the integrator's inline accumulation bit for bit.
pub fn girsanov_logweight(model: &ShellModel, path: &StochPath) -> Result<f64> {
    let states = path
        .trajectory
        .states
        .as_ref()
        .ok_or(Error::MissingStateHistory { stride: 0 })?;
    let n_steps = path.noise.n_steps;
    let recorded_steps = states.len().saturating_sub(1);
    if recorded_steps != n_steps && path.trajectory.diverged_at.is_none() {
        return Err(Error::MissingStateHistory {
            stride: (n_steps / recorded_steps.max(1)).max(2),
        });
    }
    let dt = path.noise.dt;
    let sign = if path.scheme.is_linear() { 1.0 } else { -1.0 };
    let mut logw = 0.0;
    let mut dw = vec![0.0; model.node_count()];
    for (step, x) in states[..recorded_steps].iter().enumerate() {
        path.noise.fill(step, &mut dw);
        // per-step accumulator, same grouping as the integrators' inline
        // quadrature so the two agree bit for bit
        let mut quad = 0.0;
        for j in model.topology.nodes() {
            let theta = model.parent_intensity(x, j);
            quad += sign * theta * dw[j] - 0.5 * theta * theta * dt;
        }
        logw += quad;
    }
    Ok(logw)
}

/// Weight statistics of an ensemble, computed in log space with a shared
/// shift so nothing overflows before the final reduction.
#[derive(Debug, Clone, Copy)]
pub struct WeightStats {
    pub mean: f64,
    pub se: f64,
    /// Effective sample size (sum w)^2 / sum w^2.
    pub ess: f64,
}

pub fn weight_stats(ensemble: &PathEnsemble) -> WeightStats {
    let logs: Vec<f64> = ensemble.paths.iter().map(|p| p.log_weight).collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let (mean_shifted, se_shifted) = mean_se(&shifted);
    let sum_w = pairwise_sum(&shifted);
    let sq: Vec<f64> = shifted.iter().map(|w| w * w).collect();
    let sum_w2 = pairwise_sum(&sq);
    WeightStats {
        mean: shift.exp() * mean_shifted,
        se: shift.exp() * se_shifted,
        ess: if sum_w2 > 0.0 { sum_w * sum_w / sum_w2 } else { 0.0 },
    }
}

/// Mean of phi(X_T) = energy at the final time, with its standard error.
pub fn mean_final_energy(ensemble: &PathEnsemble) -> (f64, f64) {
    let vals: Vec<f64> = ensemble.paths.iter().map(|p| energy(&p.final_state)).collect();
    mean_se(&vals)
}

/// Mean of phi(X_T) * weight with its standard error; the importance-
/// sampling estimate of the other law's expectation of phi.
pub fn reweighted_final_energy(ensemble: &PathEnsemble) -> (f64, f64) {
    let vals: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|p| energy(&p.final_state) * p.log_weight.exp())
        .collect();
    mean_se(&vals)
}

/// Per-node mean and standard error of X_j(T)^2 across the ensemble.
pub fn second_moment_estimates(ensemble: &PathEnsemble) -> Vec<(f64, f64)> {
    let n_nodes = ensemble.paths[0].final_state.len();
    (0..n_nodes)
        .map(|j| {
            let vals: Vec<f64> = ensemble
                .paths
                .iter()
                .map(|p| p.final_state[j] * p.final_state[j])
                .collect();
            mean_se(&vals)
        })
        .collect()
}
