//! Stationary reputation distributions.
//!
//! The reciprocative population follows a renewal chain: inactive peers climb
//! one level per period, active peers climb with probability `1-α`, are
//! forgiven with probability `α·β^(L-θ+1)` and fall to zero otherwise. The
//! harsh-punishment, uniform-threshold chain has a closed form; every other
//! norm is solved by iterating the one-period map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{error_punish_prob, NetworkEnv, ParamError, ProtocolParams};

/// L∞ change at which fixed-point iteration stops.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Iteration cap for the fixed-point solver.
pub const FIXED_POINT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
}

/// Reputation distribution over `0..=L` with its active mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationDistribution {
    pub eta: Vec<f64>,
    /// Mass at or above the service threshold.
    pub mu: f64,
    /// Error-punish probability the distribution was computed with.
    pub alpha: f64,
}

impl ReputationDistribution {
    fn from_eta(eta: Vec<f64>, h_o: u32, alpha: f64) -> Self {
        let mu = eta[h_o as usize..].iter().sum();
        ReputationDistribution { eta, mu, alpha }
    }

    pub fn max_level(&self) -> u32 {
        (self.eta.len() - 1) as u32
    }

    /// L∞ distance between two distributions of the same length.
    pub fn linf(&self, other: &[f64]) -> f64 {
        linf(&self.eta, other)
    }
}

pub(crate) fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One period of the reciprocative reputation dynamics.
pub fn update_map(params: &ProtocolParams, alpha: f64, eta: &[f64]) -> Vec<f64> {
    let l = params.l as usize;
    let h = params.h_o as usize;
    let mut next = vec![0.0; l + 1];
    for (theta, &mass) in eta.iter().enumerate() {
        let up = (theta + 1).min(l);
        if theta < h {
            next[up] += mass;
            continue;
        }
        let keep = alpha * params.forgiveness_prob(theta as u32);
        next[up] += (1.0 - alpha) * mass;
        next[theta] += keep * mass;
        next[0] += (alpha - keep) * mass;
    }
    next
}

/// One period of a malicious peer's cycle `0 → 1 → … → h_o → 0`.
pub fn malicious_cycle_step(params: &ProtocolParams, omega: &[f64]) -> Vec<f64> {
    let h = params.h_o as usize;
    let mut next = vec![0.0; omega.len()];
    for (theta, &mass) in omega.iter().enumerate() {
        if theta >= h {
            next[0] += mass;
        } else {
            next[theta + 1] += mass;
        }
    }
    next
}

/// Closed-form stationary distribution under harsh punishment and uniform thresholds.
pub fn stationary_closed_form(
    params: &ProtocolParams,
    env: &NetworkEnv,
) -> Result<ReputationDistribution, StationaryError> {
    params.validate()?;
    env.validate()?;
    if !params.is_harsh_uniform() {
        return Err(StationaryError::Precondition(
            "closed form requires beta = 0 and uniform thresholds",
        ));
    }
    let alpha = error_punish_prob(env, params.b);
    Ok(closed_form(params.l, params.h_o, alpha))
}

fn closed_form(l: u32, h_o: u32, alpha: f64) -> ReputationDistribution {
    let mu = 1.0 / (1.0 + alpha * h_o as f64);
    let mut eta = vec![0.0; l as usize + 1];
    for theta in 0..l {
        eta[theta as usize] = if theta <= h_o {
            alpha * mu
        } else {
            (1.0 - alpha).powi((theta - h_o) as i32) * alpha * mu
        };
    }
    eta[l as usize] = 1.0 - (1.0 + h_o as f64 * alpha) * mu + (1.0 - alpha).powi((l - h_o) as i32) * mu;
    ReputationDistribution { eta, mu, alpha }
}

/// Stationary distribution of the general `(L, β)` scheme by fixed-point iteration
/// from the uniform distribution.
pub fn stationary_fixed_point(
    params: &ProtocolParams,
    env: &NetworkEnv,
) -> Result<ReputationDistribution, StationaryError> {
    let start = vec![1.0 / (params.l as f64 + 1.0); params.l as usize + 1];
    stationary_fixed_point_from(params, env, &start)
}

/// Fixed-point iteration from an arbitrary initial distribution.
pub fn stationary_fixed_point_from(
    params: &ProtocolParams,
    env: &NetworkEnv,
    start: &[f64],
) -> Result<ReputationDistribution, StationaryError> {
    params.validate()?;
    env.validate()?;
    if start.len() != params.l as usize + 1 {
        return Err(StationaryError::Precondition("initial distribution has wrong length"));
    }
    let alpha = error_punish_prob(env, params.b);
    if alpha == 0.0 {
        let mut eta = vec![0.0; params.l as usize + 1];
        eta[params.l as usize] = 1.0;
        return Ok(ReputationDistribution::from_eta(eta, params.h_o, alpha));
    }
    let mut eta = start.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let next = update_map(params, alpha, &eta);
        residual = linf(&next, &eta);
        eta = next;
        if residual <= FIXED_POINT_TOL {
            let total: f64 = eta.iter().sum();
            eta.iter_mut().for_each(|x| *x /= total);
            return Ok(ReputationDistribution::from_eta(eta, params.h_o, alpha));
        }
    }
    Err(StationaryError::NonConvergence {
        iterations: FIXED_POINT_MAX_ITERS,
        residual,
        last: eta,
    })
}

/// Reciprocative-only stationary distribution, closed form when available.
pub fn stationary_reciprocative(
    params: &ProtocolParams,
    env: &NetworkEnv,
) -> Result<ReputationDistribution, StationaryError> {
    if params.is_harsh_uniform() {
        stationary_closed_form(params, env)
    } else {
        stationary_fixed_point(params, env)
    }
}

/// Stationary distribution of a malicious peer: uniform over `0..=h_o`.
pub fn malicious_cycle(params: &ProtocolParams) -> Vec<f64> {
    let h = params.h_o as usize;
    let mut omega = vec![0.0; params.l as usize + 1];
    omega[..=h].iter_mut().for_each(|x| *x = 1.0 / (h as f64 + 1.0));
    omega
}

/// Population distribution with a malicious fraction `p_D`.
pub fn stationary_malicious(
    params: &ProtocolParams,
    env: &NetworkEnv,
) -> Result<ReputationDistribution, StationaryError> {
    params.validate()?;
    env.validate()?;
    if env.p_c != 0.0 {
        return Err(StationaryError::Precondition("malicious mixture requires p_c = 0"));
    }
    if !params.is_harsh_uniform() {
        return Err(StationaryError::Precondition(
            "malicious mixture requires beta = 0 and uniform thresholds",
        ));
    }
    let omega_r = stationary_closed_form(params, env)?;
    let omega_d = malicious_cycle(params);
    let p = env.p_d;
    let eta = omega_r
        .eta
        .iter()
        .zip(&omega_d)
        .map(|(r, d)| (1.0 - p) * r + p * d)
        .collect();
    Ok(ReputationDistribution::from_eta(eta, params.h_o, omega_r.alpha))
}

/// Population distribution with an altruistic fraction `p_C` pinned at `L`.
pub fn stationary_altruistic(
    params: &ProtocolParams,
    env: &NetworkEnv,
) -> Result<ReputationDistribution, StationaryError> {
    params.validate()?;
    env.validate()?;
    if env.p_d != 0.0 {
        return Err(StationaryError::Precondition("altruistic mixture requires p_d = 0"));
    }
    let omega_r = stationary_reciprocative(params, env)?;
    let p = env.p_c;
    let mut eta: Vec<f64> = omega_r.eta.iter().map(|x| (1.0 - p) * x).collect();
    eta[params.l as usize] += p;
    Ok(ReputationDistribution::from_eta(eta, params.h_o, omega_r.alpha))
}

/// Stationary distribution for whatever population mix `env` describes.
pub fn stationary(params: &ProtocolParams, env: &NetworkEnv) -> Result<ReputationDistribution, StationaryError> {
    if env.p_d > 0.0 {
        stationary_malicious(params, env)
    } else if env.p_c > 0.0 {
        stationary_altruistic(params, env)
    } else {
        stationary_reciprocative(params, env)
    }
}
