//! Domain types for social norms and the gift-giving stage game.
//!
//! A social norm pairs a threshold-based social strategy (who serves whom)
//! with a reputation scheme (how compliance moves reputations). Everything in
//! this module is a pure function of its inputs and is shared by the analytic
//! modules and the simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Invalid environment or protocol parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ParamError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ParamError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Invalid { field, .. } => field,
        }
    }
}

/// Environment constants: stage-game payoffs, error rate, request rate,
/// patience and the population mix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkEnv {
    /// Benefit a client receives per delivered chunk.
    pub r: f64,
    /// Cost a server pays per uploaded chunk.
    pub c: f64,
    /// Probability that an attempted upload fails.
    pub eps: f64,
    /// Utilization rate of each connection per period.
    pub lambda: f64,
    /// Discount factor.
    pub delta: f64,
    /// Fraction of altruistic peers.
    #[serde(default)]
    pub p_c: f64,
    /// Fraction of malicious peers.
    #[serde(default)]
    pub p_d: f64,
}

impl NetworkEnv {
    /// Reciprocative-only environment.
    pub fn new(r: f64, c: f64, eps: f64, lambda: f64, delta: f64) -> Self {
        NetworkEnv {
            r,
            c,
            eps,
            lambda,
            delta,
            p_c: 0.0,
            p_d: 0.0,
        }
    }

    pub fn with_altruists(mut self, p_c: f64) -> Self {
        self.p_c = p_c;
        self
    }

    pub fn with_malicious(mut self, p_d: f64) -> Self {
        self.p_d = p_d;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = [
            ("r", self.r),
            ("c", self.c),
            ("eps", self.eps),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("p_c", self.p_c),
            ("p_d", self.p_d),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(ParamError::invalid(field, "must be finite"));
            }
        }
        if self.r <= 0.0 {
            return Err(ParamError::invalid("r", "benefit must be positive"));
        }
        if self.c < 0.0 {
            return Err(ParamError::invalid("c", "cost must be non-negative"));
        }
        if self.r <= self.c {
            return Err(ParamError::invalid("c", "sharing requires r > c"));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(ParamError::invalid("eps", "must lie in [0, 1)"));
        }
        if self.lambda <= 0.0 {
            return Err(ParamError::invalid("lambda", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(ParamError::invalid("delta", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.p_c) {
            return Err(ParamError::invalid("p_c", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(ParamError::invalid("p_d", "must lie in [0, 1]"));
        }
        if self.p_c + self.p_d > 1.0 + 1e-12 {
            return Err(ParamError::invalid("p_d", "p_c + p_d must not exceed 1"));
        }
        Ok(())
    }

    /// Expected number of requests a peer emits per period, `λ·b`.
    pub fn requests_per_period(&self, b: u32) -> f64 {
        self.lambda * b as f64
    }

    /// Net expected surplus of one transaction, `(1-ε)r - c`.
    pub fn net_surplus(&self) -> f64 {
        (1.0 - self.eps) * self.r - self.c
    }
}

/// A candidate social norm: reputation range, service thresholds, forgiveness
/// base and connection limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Maximum reputation.
    #[serde(rename = "L")]
    pub l: u32,
    /// Service threshold: peers at or above it must serve.
    pub h_o: u32,
    /// Per-reputation client thresholds for servers `θ = h_o..=L`.
    pub m_o: Vec<u32>,
    /// Forgiveness base; `0` is the harshest punishment.
    pub beta: f64,
    /// Maximum number of concurrent connections.
    pub b: u32,
}

impl ProtocolParams {
    /// Uniform-threshold, harsh-punishment norm.
    pub fn uniform(l: u32, h_o: u32, b: u32) -> Self {
        let len = l.saturating_sub(h_o) + 1;
        ProtocolParams {
            l,
            h_o,
            m_o: vec![h_o; len as usize],
            beta: 0.0,
            b,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_b(mut self, b: u32) -> Self {
        self.b = b;
        self
    }

    /// Replace the client thresholds; `m_o[i]` applies to server reputation `h_o + i`.
    pub fn with_thresholds(mut self, m_o: Vec<u32>) -> Self {
        self.m_o = m_o;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.l < 1 {
            return Err(ParamError::invalid("L", "must be at least 1"));
        }
        if self.h_o < 1 || self.h_o > self.l {
            return Err(ParamError::invalid("h_o", format!("must lie in 1..={}", self.l)));
        }
        if self.b < 1 {
            return Err(ParamError::invalid("b", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.beta) || !self.beta.is_finite() {
            return Err(ParamError::invalid("beta", "must lie in [0, 1]"));
        }
        let expected = (self.l - self.h_o + 1) as usize;
        if self.m_o.len() != expected {
            return Err(ParamError::invalid(
                "m_o",
                format!("expected {expected} thresholds for θ = h_o..=L, got {}", self.m_o.len()),
            ));
        }
        if let Some(&m) = self.m_o.iter().find(|&&m| m < self.h_o || m > self.l) {
            return Err(ParamError::invalid(
                "m_o",
                format!("threshold {m} outside {}..={}", self.h_o, self.l),
            ));
        }
        if self.m_o.windows(2).any(|w| w[0] > w[1]) {
            return Err(ParamError::invalid("m_o", "thresholds must be non-decreasing in θ"));
        }
        Ok(())
    }

    /// Client threshold applied by a server of reputation `theta >= h_o`.
    pub fn client_threshold(&self, theta: u32) -> u32 {
        debug_assert!(theta >= self.h_o && theta <= self.l);
        self.m_o[(theta - self.h_o) as usize]
    }

    /// Lowest client reputation any active server is prescribed to serve.
    pub fn min_client_threshold(&self) -> u32 {
        self.m_o[0]
    }

    pub fn is_uniform(&self) -> bool {
        self.m_o.iter().all(|&m| m == self.h_o)
    }

    /// Harsh punishment with uniform thresholds: the closed-form regime.
    pub fn is_harsh_uniform(&self) -> bool {
        self.beta == 0.0 && self.is_uniform()
    }

    /// Probability that a deviating `theta`-peer keeps its reputation, `β^(L-θ+1)`.
    pub fn forgiveness_prob(&self, theta: u32) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        self.beta.powi((self.l - theta.min(self.l) + 1) as i32)
    }
}

/// Server action in one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Serve,
    NotServe,
}

/// A reputation value in `0..=L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Reputation(pub u32);

impl Reputation {
    pub fn value(self) -> u32 {
        self.0
    }
}

impl From<u32> for Reputation {
    fn from(v: u32) -> Self {
        Reputation(v)
    }
}

/// Behavioral type of a peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PeerKind {
    Reciprocative,
    Altruistic,
    Malicious,
    /// Peer running the binary-reputation tit-for-tat baseline.
    TftAgent,
}

/// Prescribed action of a server toward a client.
pub fn social_strategy(params: &ProtocolParams, server: Reputation, client: Reputation) -> Action {
    if server.0 >= params.h_o && server.0 <= params.l && client.0 >= params.client_threshold(server.0) {
        Action::Serve
    } else {
        Action::NotServe
    }
}

/// Compliance bit of one transaction: `0` if the action matches the strategy.
pub fn phi_compliance(params: &ProtocolParams, server: Reputation, client: Reputation, taken: Action) -> u8 {
    u8::from(taken != social_strategy(params, server, client))
}

/// Period-end reputation update.
///
/// `x` is the OR of the period's compliance bits; `forgiven` is drawn by the
/// caller with probability [`ProtocolParams::forgiveness_prob`].
pub fn reputation_update(params: &ProtocolParams, rep: Reputation, x: u8, forgiven: bool) -> Reputation {
    match (x, forgiven) {
        (0, _) => Reputation((rep.0 + 1).min(params.l)),
        (_, true) => Reputation(rep.0.min(params.l)),
        (_, false) => Reputation(0),
    }
}

/// Probability that a compliant active peer is punished by at least one
/// service error in a period, `1 - (1-ε)^(λb)`.
pub fn error_punish_prob(env: &NetworkEnv, b: u32) -> f64 {
    if env.eps == 0.0 {
        return 0.0;
    }
    1.0 - (1.0 - env.eps).powf(env.requests_per_period(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(l: u32, h: u32) -> ProtocolParams {
        ProtocolParams::uniform(l, h, 1)
    }

    #[test]
    fn strategy_examples() {
        let p = norm(3, 1);
        assert_eq!(social_strategy(&p, Reputation(2), Reputation(1)), Action::Serve);
        assert_eq!(social_strategy(&p, Reputation(0), Reputation(3)), Action::NotServe);
        let v = norm(3, 1).with_thresholds(vec![1, 2, 2]);
        assert_eq!(social_strategy(&v, Reputation(3), Reputation(1)), Action::NotServe);
        assert_eq!(social_strategy(&v, Reputation(1), Reputation(1)), Action::Serve);
    }

    #[test]
    fn uniform_thresholds_reduce_to_two_sided_rule() {
        for l in 1..=6 {
            for h in 1..=l {
                let p = norm(l, h);
                for s in 0..=l {
                    for c in 0..=l {
                        let expect = if s >= h && c >= h { Action::Serve } else { Action::NotServe };
                        assert_eq!(social_strategy(&p, Reputation(s), Reputation(c)), expect);
                        let a = social_strategy(&p, Reputation(s), Reputation(c));
                        assert_eq!(phi_compliance(&p, Reputation(s), Reputation(c), a), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn compliance_examples() {
        let p = norm(3, 1);
        assert_eq!(phi_compliance(&p, Reputation(2), Reputation(2), Action::Serve), 0);
        assert_eq!(phi_compliance(&p, Reputation(2), Reputation(0), Action::Serve), 1);
        assert_eq!(phi_compliance(&p, Reputation(0), Reputation(2), Action::NotServe), 0);
    }

    #[test]
    fn update_examples() {
        let p = norm(3, 1);
        assert_eq!(reputation_update(&p, Reputation(3), 0, false), Reputation(3));
        assert_eq!(reputation_update(&p, Reputation(1), 1, false), Reputation(0));
        assert_eq!(reputation_update(&p, Reputation(2), 1, true), Reputation(2));
    }

    #[test]
    fn punish_prob_examples() {
        let env = NetworkEnv::new(1.0, 0.2, 0.0, 1.0, 0.8);
        assert_eq!(error_punish_prob(&env, 7), 0.0);
        let env = NetworkEnv::new(1.0, 0.2, 0.1, 1.0, 0.8);
        assert!((error_punish_prob(&env, 2) - 0.19).abs() < 1e-12);
        let env = NetworkEnv::new(1.0, 0.2, 0.5, 1.0, 0.8);
        assert!((error_punish_prob(&env, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn punish_prob_matches_bernoulli_frequency() {
        use rand::{Rng, SeedableRng};
        let env = NetworkEnv::new(1.0, 0.2, 0.1, 1.0, 0.8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| (0..2).any(|_| rng.gen::<f64>() < env.eps))
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - error_punish_prob(&env, 2)).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn validation_rejects_bad_thresholds() {
        assert_eq!(norm(3, 0).validate().unwrap_err().field(), "h_o");
        assert_eq!(norm(3, 4).validate().unwrap_err().field(), "h_o");
        let bad = norm(3, 1).with_thresholds(vec![2, 1, 3]);
        assert_eq!(bad.validate().unwrap_err().field(), "m_o");
        let short = norm(3, 1).with_thresholds(vec![1, 1]);
        assert_eq!(short.validate().unwrap_err().field(), "m_o");
        let env = NetworkEnv::new(1.0, 1.0, 0.0, 1.0, 0.5);
        assert_eq!(env.validate().unwrap_err().field(), "c");
        let env = NetworkEnv::new(1.0, 0.1, 0.0, 1.0, 0.5).with_altruists(0.7).with_malicious(0.4);
        assert_eq!(env.validate().unwrap_err().field(), "p_d");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn update_stays_in_range(l in 1u32..8, rep in 0u32..8, x in 0u8..2, forgiven: bool) {
                let p = ProtocolParams::uniform(l, 1, 1);
                let rep = Reputation(rep.min(l));
                let next = reputation_update(&p, rep, x, forgiven);
                prop_assert!(next.0 <= l);
                if x == 0 && rep.0 < l {
                    let up = reputation_update(&p, Reputation(rep.0 + 1), 0, forgiven);
                    prop_assert!(up >= next);
                }
            }

            #[test]
            fn punish_prob_increasing(eps in 0.001f64..0.3, lambda in 0.1f64..3.0, b in 1u32..20) {
                let env = NetworkEnv::new(1.0, 0.1, eps, lambda, 0.5);
                prop_assert!(error_punish_prob(&env, b + 1) > error_punish_prob(&env, b));
                let worse = NetworkEnv { eps: eps + 0.05, ..env };
                prop_assert!(error_punish_prob(&worse, b) > error_punish_prob(&env, b));
                prop_assert!(error_punish_prob(&env, b) > 0.0);
            }
        }
    }
}
