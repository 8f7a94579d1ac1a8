//! Utilities, one-shot-deviation incentive constraints and the existence
//! thresholds derived from them.
//!
//! Discounted utilities solve `v∞ = v + δ·P·v∞` where `P` is the compliant
//! reputation transition matrix. A `θ`-peer's one-shot deviation is checked
//! against
//!
//! ```text
//! δ(1-α)[v∞(min(θ+1, L)) - f(θ)·v∞(θ) - (1-f(θ))·v∞(0)]  ≥  λb·c   (θ ≥ h_o)
//!                                                         ≥  -c     (θ < h_o)
//! ```
//!
//! with `f(θ) = β^(L-θ+1)` the forgiveness probability.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{error_punish_prob, NetworkEnv, ParamError, ProtocolParams};
use crate::stationary::{self, ReputationDistribution, StationaryError};

/// Slack below which a constraint counts as violated.
pub const SLACK_TOL: f64 = 1e-12;
/// Bisection tolerance for the connection, forgiveness and altruist thresholds.
pub const SEARCH_TOL: f64 = 1e-8;
/// Bisection tolerance for the discount threshold.
pub const DISCOUNT_TOL: f64 = 1e-10;
/// Scan step preceding the altruist-fraction bisection.
const ALTRUIST_SCAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IncentiveError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error("altruistic and malicious peers cannot be combined analytically")]
    MixedPopulation,
    #[error("{0} requires uniform client thresholds")]
    NeedsUniformThresholds(&'static str),
    #[error("singular utility recursion")]
    Singular,
    #[error("no discount factor in (0, 1) sustains cooperation at these costs")]
    NeverSatisfiable,
}

/// Which utility model applies to a `(params, env)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Reciprocative peers, uniform thresholds.
    Baseline,
    /// Reciprocative peers, reputation-dependent client thresholds.
    VariableThresholds,
    /// Reciprocative and malicious peers.
    Malicious,
    /// Reciprocative and altruistic peers.
    Altruistic,
}

pub fn regime(params: &ProtocolParams, env: &NetworkEnv) -> Result<Regime, IncentiveError> {
    params.validate()?;
    env.validate()?;
    match (env.p_c > 0.0, env.p_d > 0.0) {
        (true, true) => Err(IncentiveError::MixedPopulation),
        (false, true) if !params.is_uniform() => Err(IncentiveError::NeedsUniformThresholds("malicious mix")),
        (true, false) if !params.is_uniform() => Err(IncentiveError::NeedsUniformThresholds("altruistic mix")),
        (false, true) => Ok(Regime::Malicious),
        (true, false) => Ok(Regime::Altruistic),
        (false, false) if params.is_uniform() => Ok(Regime::Baseline),
        (false, false) => Ok(Regime::VariableThresholds),
    }
}

/// Expected per-period upload cost of each active reputation under uniform
/// routing of every eligible request among the servers willing to take it.
pub fn service_cost(params: &ProtocolParams, env: &NetworkEnv, dist: &ReputationDistribution) -> Vec<f64> {
    let l = params.l;
    let h = params.h_o;
    let rate = env.requests_per_period(params.b);
    let eta = &dist.eta;
    // willing pool mass for each client reputation
    let pool: Vec<f64> = (0..=l)
        .map(|client| {
            (h..=l)
                .filter(|&s| params.client_threshold(s) <= client)
                .map(|s| eta[s as usize])
                .sum()
        })
        .collect();
    (0..=l)
        .map(|theta| {
            if theta < h {
                return 0.0;
            }
            let load: f64 = (params.client_threshold(theta)..=l)
                .filter(|&client| eta[client as usize] > 0.0 && pool[client as usize] > 0.0)
                .map(|client| eta[client as usize] / pool[client as usize])
                .sum();
            env.c * rate * load
        })
        .collect()
}

/// Expected one-period utility of a reciprocative peer at each reputation.
pub fn one_period_utilities(
    params: &ProtocolParams,
    env: &NetworkEnv,
    dist: &ReputationDistribution,
) -> Result<Vec<f64>, IncentiveError> {
    let rate = env.requests_per_period(params.b);
    let h = params.h_o;
    let gross = rate * (1.0 - env.eps) * env.r;
    let v = match regime(params, env)? {
        Regime::Baseline => (0..=params.l)
            .map(|t| if t >= h { rate * env.net_surplus() } else { 0.0 })
            .collect(),
        Regime::VariableThresholds => {
            let q = service_cost(params, env, dist);
            let eligible = params.min_client_threshold();
            (0..=params.l)
                .map(|t| if t >= eligible { gross } else { 0.0 } - q[t as usize])
                .collect()
        }
        Regime::Malicious => {
            let share = malicious_download_share(params, env, dist);
            (0..=params.l)
                .map(|t| if t >= h { rate * share * env.net_surplus() } else { 0.0 })
                .collect()
        }
        Regime::Altruistic => {
            let p = env.p_c;
            let mu = dist.mu;
            let active = gross - rate * (mu - p) / mu * env.c;
            let inactive = if p <= 0.5 { gross * p / (1.0 - p) } else { gross };
            (0..=params.l).map(|t| if t >= h { active } else { inactive }).collect()
        }
    };
    Ok(v)
}

/// Fraction of an active reciprocative peer's requests landing on reciprocative servers.
fn malicious_download_share(params: &ProtocolParams, env: &NetworkEnv, dist: &ReputationDistribution) -> f64 {
    let cycle = params.h_o as f64 + 1.0;
    let p = env.p_d;
    let num = dist.mu - p / cycle;
    let den = dist.mu + (cycle - 1.0) / cycle * p;
    if den <= 0.0 {
        0.0
    } else {
        (num / den).max(0.0)
    }
}

/// Compliant transition matrix of a reciprocative peer.
pub fn transition_matrix(params: &ProtocolParams, alpha: f64) -> DMatrix<f64> {
    let n = params.l as usize + 1;
    let mut p = DMatrix::zeros(n, n);
    for theta in 0..n {
        let up = (theta + 1).min(n - 1);
        if theta < params.h_o as usize {
            p[(theta, up)] += 1.0;
        } else {
            let keep = alpha * params.forgiveness_prob(theta as u32);
            p[(theta, up)] += 1.0 - alpha;
            p[(theta, theta)] += keep;
            p[(theta, 0)] += alpha - keep;
        }
    }
    p
}

/// Solve the discounted-utility recursion for given one-period utilities.
pub fn discounted_utilities(
    params: &ProtocolParams,
    env: &NetworkEnv,
    v_one: &[f64],
) -> Result<Vec<f64>, IncentiveError> {
    let alpha = error_punish_prob(env, params.b);
    let n = v_one.len();
    let system = DMatrix::identity(n, n) - transition_matrix(params, alpha) * env.delta;
    let rhs = DVector::from_column_slice(v_one);
    let sol = system.lu().solve(&rhs).ok_or(IncentiveError::Singular)?;
    Ok(sol.iter().copied().collect())
}

/// Per-reputation utilities of a norm at its stationary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityProfile {
    pub v_one: Vec<f64>,
    pub v_inf: Vec<f64>,
    pub social_utility: f64,
}

pub fn overall_utilities(params: &ProtocolParams, env: &NetworkEnv) -> Result<UtilityProfile, IncentiveError> {
    let dist = stationary::stationary(params, env)?;
    let v_one = one_period_utilities(params, env, &dist)?;
    let v_inf = discounted_utilities(params, env, &v_one)?;
    let social_utility = social_utility(params, env, &dist)?;
    Ok(UtilityProfile {
        v_one,
        v_inf,
        social_utility,
    })
}

/// Average one-period utility over the population at a stationary distribution.
pub fn social_utility(
    params: &ProtocolParams,
    env: &NetworkEnv,
    dist: &ReputationDistribution,
) -> Result<f64, IncentiveError> {
    let rate = env.requests_per_period(params.b);
    Ok(match regime(params, env)? {
        Regime::Baseline => rate * dist.mu * env.net_surplus(),
        Regime::VariableThresholds => {
            let v = one_period_utilities(params, env, dist)?;
            dist.eta.iter().zip(&v).map(|(e, u)| e * u).sum()
        }
        Regime::Malicious => {
            let share = malicious_download_share(params, env, dist);
            let reciprocative_active = dist.mu - env.p_d / (params.h_o as f64 + 1.0);
            reciprocative_active * rate * share * env.net_surplus()
        }
        Regime::Altruistic => {
            let p = env.p_c;
            let mu = dist.mu;
            if p > 0.5 {
                rate * (1.0 - p) * env.net_surplus()
            } else {
                rate * (1.0 - env.eps) * (p / (1.0 - p) * (1.0 - mu) + (mu - p)) * env.r
                    - rate * ((mu - p).powi(2) / mu - p) * env.c
            }
        }
    })
}

/// Social utility when reciprocative peers stop serving and only altruists upload.
pub fn collapsed_social_utility(env: &NetworkEnv, b: u32) -> f64 {
    env.requests_per_period(b) * env.p_c.min(1.0 - env.p_c) * env.net_surplus()
}

/// Mean one-period utility of reciprocative peers alone.
pub fn reciprocative_mean_utility(params: &ProtocolParams, env: &NetworkEnv) -> Result<f64, IncentiveError> {
    let omega = stationary::stationary_reciprocative(params, &NetworkEnv { p_c: 0.0, p_d: 0.0, ..*env })?;
    let dist = stationary::stationary(params, env)?;
    let v = one_period_utilities(params, env, &dist)?;
    Ok(omega.eta.iter().zip(&v).map(|(e, u)| e * u).sum())
}

/// Outcome of the one-shot-deviation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveReport {
    /// Smallest slack of the serve constraints (`θ ≥ h_o`).
    pub serve_slack: f64,
    /// Smallest slack of the refusal constraints (`θ < h_o`).
    pub refuse_slack: f64,
    /// Serve slack per transaction, `serve_slack / (λb)`.
    pub serve_margin: f64,
    /// Slack of the constraint at every reputation.
    pub per_theta_slacks: Vec<f64>,
    pub is_equilibrium: bool,
}

/// Evaluate every one-shot deviation constraint of a norm.
pub fn check_equilibrium(params: &ProtocolParams, env: &NetworkEnv) -> Result<IncentiveReport, IncentiveError> {
    let profile = overall_utilities(params, env)?;
    Ok(report_from_values(params, env, &profile.v_inf))
}

fn report_from_values(params: &ProtocolParams, env: &NetworkEnv, v_inf: &[f64]) -> IncentiveReport {
    let alpha = error_punish_prob(env, params.b);
    let rate = env.requests_per_period(params.b);
    let l = params.l as usize;
    let per_theta_slacks: Vec<f64> = (0..=l)
        .map(|theta| {
            let f = params.forgiveness_prob(theta as u32);
            let gap = v_inf[(theta + 1).min(l)] - f * v_inf[theta] - (1.0 - f) * v_inf[0];
            let lhs = env.delta * (1.0 - alpha) * gap;
            if theta >= params.h_o as usize {
                lhs - rate * env.c
            } else {
                lhs + env.c
            }
        })
        .collect();
    let h = params.h_o as usize;
    let serve_slack = per_theta_slacks[h..].iter().copied().fold(f64::INFINITY, f64::min);
    let refuse_slack = per_theta_slacks[..h].iter().copied().fold(f64::INFINITY, f64::min);
    IncentiveReport {
        serve_slack,
        refuse_slack,
        serve_margin: serve_slack / rate,
        per_theta_slacks,
        is_equilibrium: serve_slack >= -SLACK_TOL && refuse_slack >= -SLACK_TOL,
    }
}

/// Incentive check for the binary-reputation tit-for-tat baseline, where
/// service depends only on the client's last-period compliance and peers at
/// reputation 0 are served only by altruists.
pub fn tft_equilibrium(env: &NetworkEnv, b: u32) -> Result<IncentiveReport, IncentiveError> {
    env.validate()?;
    let alpha = error_punish_prob(env, b);
    let rate = env.requests_per_period(b);
    let p = env.p_c;
    let altruist_share = if p >= 0.5 { 1.0 } else { p / (1.0 - p) };
    // transitions do not depend on the current reputation, so v∞(1) - v∞(0) = v(1) - v(0)
    let gap = rate * (1.0 - env.eps) * env.r * (1.0 - altruist_share);
    let lhs = env.delta * (1.0 - alpha) * gap;
    let serve_slack = lhs - rate * env.c;
    let refuse_slack = lhs + env.c;
    Ok(IncentiveReport {
        serve_slack,
        refuse_slack,
        serve_margin: serve_slack / rate,
        per_theta_slacks: vec![serve_slack, serve_slack],
        is_equilibrium: serve_slack >= -SLACK_TOL && refuse_slack >= -SLACK_TOL,
    })
}

fn reciprocative_only(env: &NetworkEnv) -> NetworkEnv {
    NetworkEnv {
        p_c: 0.0,
        p_d: 0.0,
        ..*env
    }
}

/// Lower bound `H_o` on the service threshold of a harsh uniform norm with
/// `b` connections. `None` when no finite threshold satisfies the serve
/// constraint.
pub fn service_threshold_bound(env: &NetworkEnv, b: u32) -> Option<f64> {
    let c = env.c;
    if c == 0.0 {
        return Some(0.0);
    }
    let delta = env.delta;
    if delta == 0.0 {
        return None;
    }
    let alpha = error_punish_prob(env, b);
    let denom = delta * ((1.0 - alpha) * env.net_surplus() - alpha * c);
    if denom <= 0.0 {
        return None;
    }
    let arg = 1.0 - (1.0 - delta) * c / denom;
    if arg <= 0.0 {
        return None;
    }
    Some(arg.ln() / delta.ln())
}

/// Smallest admissible service threshold `h_o ≤ L` of a harsh uniform norm.
pub fn min_service_threshold(env: &NetworkEnv, b: u32, l: u32) -> Option<u32> {
    let bound = service_threshold_bound(env, b)?;
    let h = ((bound - 1e-9).ceil().max(1.0)) as u64;
    (h <= l as u64).then_some(h as u32)
}

/// Largest `b ≤ b_cap` for which the norm is an equilibrium. `params.b` is ignored.
pub fn max_connections(env: &NetworkEnv, params: &ProtocolParams, b_cap: u32) -> Result<Option<u32>, IncentiveError> {
    let passes = |b: u32| -> Result<bool, IncentiveError> {
        Ok(check_equilibrium(&params.clone().with_b(b), env)?.is_equilibrium)
    };
    if b_cap == 0 || !passes(1)? {
        return Ok(None);
    }
    if passes(b_cap)? {
        return Ok(Some(b_cap));
    }
    let (mut lo, mut hi) = (1, b_cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Largest cost-to-benefit ratio at which some harsh uniform norm with maximum
/// reputation `l` is an equilibrium (attained at `h_o = L`, `b = 1`).
pub fn existence_cost_threshold(env: &NetworkEnv, l: u32) -> f64 {
    let delta = env.delta;
    let alpha = error_punish_prob(env, 1);
    let tail = 1.0 - delta.powi(l as i32);
    delta * (1.0 - alpha) * (1.0 - env.eps) * tail / (1.0 - delta + delta * tail)
}

/// Smallest discount factor at which a harsh uniform norm with maximum
/// reputation `l` can be an equilibrium.
pub fn existence_discount_threshold(env: &NetworkEnv, l: u32) -> Result<f64, IncentiveError> {
    let env = reciprocative_only(env);
    env.validate()?;
    if env.c == 0.0 {
        return Ok(0.0);
    }
    let params = ProtocolParams::uniform(l, l, 1);
    let margin = |delta: f64| -> Result<f64, IncentiveError> {
        Ok(check_equilibrium(&params, &NetworkEnv { delta, ..env })?.serve_margin)
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
    if margin(hi)? < 0.0 {
        return Err(IncentiveError::NeverSatisfiable);
    }
    while hi - lo > DISCOUNT_TOL {
        let mid = 0.5 * (lo + hi);
        if margin(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Largest forgiveness base `β` keeping the norm an equilibrium, or `None`
/// when even harsh punishment fails.
pub fn max_forgiveness(params: &ProtocolParams, env: &NetworkEnv) -> Result<Option<f64>, IncentiveError> {
    let passes = |beta: f64| -> Result<bool, IncentiveError> {
        Ok(check_equilibrium(&params.clone().with_beta(beta), env)?.is_equilibrium)
    };
    if !passes(0.0)? {
        return Ok(None);
    }
    if passes(1.0)? {
        return Ok(Some(1.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > SEARCH_TOL {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Largest altruist fraction `p̄_C ∈ [0, 0.5]` at which the norm remains an equilibrium.
pub fn max_altruist_fraction(params: &ProtocolParams, env: &NetworkEnv) -> Result<f64, IncentiveError> {
    let base = NetworkEnv { p_d: 0.0, ..*env };
    let passes = |p: f64| -> Result<bool, IncentiveError> {
        Ok(check_equilibrium(params, &base.with_altruists(p))?.is_equilibrium)
    };
    if !passes(0.0)? {
        return Ok(0.0);
    }
    let steps = (0.5 / ALTRUIST_SCAN_STEP).round() as usize;
    let mut last_pass = 0;
    for k in 1..=steps {
        if passes(k as f64 * ALTRUIST_SCAN_STEP)? {
            last_pass = k;
        }
    }
    if last_pass == steps {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (
        last_pass as f64 * ALTRUIST_SCAN_STEP,
        (last_pass + 1) as f64 * ALTRUIST_SCAN_STEP,
    );
    while hi - lo > SEARCH_TOL {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
