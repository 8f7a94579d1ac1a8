//! Seeded agent-based simulator of the repeated file-sharing game.
//!
//! Each period every requesting peer emits `round(λb)` requests. Requests are
//! processed in a tracker-shuffled order; a request is redirected among
//! candidate servers until one accepts. A candidate that refuses a client it
//! was supposed to serve is flagged non-compliant and is not asked again by
//! that request, so redirection terminates after at most `n_peers` attempts.
//! Drawing uniformly among the remaining candidates is the same in
//! distribution as redirecting to uniformly random peers and skipping those
//! whose answer is already known. Reputations update synchronously at the end
//! of the period.
//!
//! Randomness comes from one ChaCha8 generator per peer, seeded by the run
//! seed and selected by stream `peer_id + 1`; stream 0 belongs to the tracker.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::incentives::{self, IncentiveError};
use crate::model::{social_strategy, Action, NetworkEnv, ParamError, PeerKind, ProtocolParams, Reputation};
use crate::stationary;

/// Periods per batch when estimating standard errors from batch means.
const BATCH: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    SocialNorm,
    Tft,
}

/// How reciprocative peers decide whether to follow the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    /// Always follow the prescribed strategy.
    Compliant,
    /// Follow it only if doing so is an equilibrium, otherwise never serve.
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialReputations {
    /// Every peer starts at 0.
    Zero,
    /// Reputations are drawn from the analytic stationary distribution.
    Stationary,
}

/// Upload limit of each serving peer per period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UploadCapacity {
    /// `round(λb)`, the number of requests each peer emits.
    Matched,
    Unlimited,
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviationMode {
    Comply,
    /// Take the opposite of the prescribed action in period 0, then comply.
    DeviateFirstPeriod,
    RefuseAll,
    ServeAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviantPolicy {
    /// Index of a reciprocative peer (reciprocative peers come first).
    pub peer: usize,
    pub start_rep: u32,
    pub mode: DeviationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_peers: usize,
    pub n_periods: usize,
    pub seed: u64,
    pub params: ProtocolParams,
    /// Also fixes the population mix through `p_c` and `p_d`.
    pub env: NetworkEnv,
    pub flavor: Flavor,
    pub behavior: Behavior,
    pub initial: InitialReputations,
    pub capacity: UploadCapacity,
    pub deviant: Option<DeviantPolicy>,
    /// Number of final periods averaged in the summary; 0 selects the last quarter.
    #[serde(default)]
    pub window: usize,
    /// Keep per-period records in the trace.
    #[serde(default = "yes")]
    pub record_periods: bool,
}

fn yes() -> bool {
    true
}

impl SimConfig {
    pub fn new(n_peers: usize, n_periods: usize, seed: u64, params: ProtocolParams, env: NetworkEnv) -> Self {
        SimConfig {
            n_peers,
            n_periods,
            seed,
            params,
            env,
            flavor: Flavor::SocialNorm,
            behavior: Behavior::Compliant,
            initial: InitialReputations::Zero,
            capacity: UploadCapacity::Matched,
            deviant: None,
            window: 0,
            record_periods: true,
        }
    }

    pub fn population(&self) -> (usize, usize, usize) {
        let n = self.n_peers as f64;
        let altruists = (self.env.p_c * n).round() as usize;
        let malicious = ((self.env.p_d * n).round() as usize).min(self.n_peers - altruists);
        (self.n_peers - altruists - malicious, altruists, malicious)
    }

    pub fn window_len(&self) -> usize {
        if self.window == 0 {
            (self.n_periods / 4).max(1)
        } else {
            self.window.min(self.n_periods)
        }
    }

    pub fn requests_per_peer(&self) -> usize {
        self.env.requests_per_period(self.params.b).round() as usize
    }

    fn max_rep(&self) -> u32 {
        match self.flavor {
            Flavor::SocialNorm => self.params.l,
            Flavor::Tft => 1,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.env.validate()?;
        self.params.validate()?;
        if self.n_peers < 2 {
            return Err(ParamError::invalid("n_peers", "must be at least 2"));
        }
        if self.n_periods < 1 {
            return Err(ParamError::invalid("n_periods", "must be at least 1"));
        }
        if self.requests_per_peer() < 1 {
            return Err(ParamError::invalid("b", "round(lambda * b) must be at least 1"));
        }
        if let Some(d) = self.deviant {
            let (recip, _, _) = self.population();
            if d.peer >= recip {
                return Err(ParamError::invalid("deviant.peer", "must index a reciprocative peer"));
            }
            if d.start_rep > self.max_rep() {
                return Err(ParamError::invalid("deviant.start_rep", "exceeds the maximum reputation"));
            }
        }
        Ok(())
    }
}

/// Per-period event counts. Every request ends up exactly one of served,
/// errored, corrupted or unserved. `refused` counts refusals that made the
/// refusing peer non-compliant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub requests: u64,
    pub served: u64,
    pub errored: u64,
    pub corrupted: u64,
    pub unserved: u64,
    pub refused: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.requests += o.requests;
        self.served += o.served;
        self.errored += o.errored;
        self.corrupted += o.corrupted;
        self.unserved += o.unserved;
        self.refused += o.refused;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    /// Reputation histogram over all peers at the start of the period.
    pub eta_hat: Vec<f64>,
    pub counts: Counts,
    /// Mean utility of reciprocative peers that were active at period start.
    pub active_utility: Option<f64>,
    /// Mean utility per peer kind, in [`KIND_ORDER`].
    pub kind_utility: Vec<Option<f64>>,
}

/// Order of the per-kind columns.
pub const KIND_ORDER: [PeerKind; 4] = [
    PeerKind::Reciprocative,
    PeerKind::TftAgent,
    PeerKind::Altruistic,
    PeerKind::Malicious,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: PeerKind,
    pub count: usize,
    /// Mean one-period utility per peer over the window.
    pub mean_utility: f64,
    pub std_err: f64,
    pub mean_discounted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub window_start: usize,
    pub eta_hat: Vec<f64>,
    pub mu_hat: f64,
    /// Successful downloads over requests of reciprocative peers in the window.
    pub delivery_rate: f64,
    /// Same, counting only uploads by reciprocative peers.
    pub mutual_rate: f64,
    pub active_utility: f64,
    pub active_utility_se: f64,
    pub kinds: Vec<KindSummary>,
    pub counts: Counts,
    pub max_altruist_uploads: u32,
    /// Bound on discounted utility beyond the simulated horizon, `δ^T·u_max/(1-δ)`.
    pub truncation_bound: f64,
    pub complying: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub config: SimConfig,
    pub periods: Vec<PeriodRecord>,
    pub summary: SimSummary,
    pub discounted: Vec<f64>,
    pub final_reps: Vec<u32>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Disposition {
    Follow,
    Refuse,
    ServeAll,
}

struct Peer {
    kind: PeerKind,
    rep: u32,
    rng: ChaCha8Rng,
}

/// Candidate servers for each client reputation with O(1) draw and removal.
struct Pools {
    members: Vec<Vec<usize>>,
    pos: Vec<Vec<usize>>,
}

impl Pools {
    fn new(levels: usize, n: usize) -> Self {
        Pools {
            members: vec![Vec::new(); levels],
            pos: vec![vec![usize::MAX; n]; levels],
        }
    }

    fn clear(&mut self) {
        for (m, p) in self.members.iter_mut().zip(self.pos.iter_mut()) {
            for &id in m.iter() {
                p[id] = usize::MAX;
            }
            m.clear();
        }
    }

    fn insert(&mut self, level: usize, id: usize) {
        self.pos[level][id] = self.members[level].len();
        self.members[level].push(id);
    }

    fn remove(&mut self, id: usize) {
        for level in 0..self.members.len() {
            let at = self.pos[level][id];
            if at == usize::MAX {
                continue;
            }
            let m = &mut self.members[level];
            m.swap_remove(at);
            if at < m.len() {
                self.pos[level][m[at]] = at;
            }
            self.pos[level][id] = usize::MAX;
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest-remainder integer split of `n` according to `weights`.
fn apportion(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Whether reciprocative peers follow the norm under `config.behavior`.
pub fn peers_comply(config: &SimConfig) -> Result<bool, SimError> {
    Ok(match config.behavior {
        Behavior::Compliant => true,
        Behavior::Rational => match config.flavor {
            Flavor::SocialNorm => incentives::check_equilibrium(&config.params, &config.env)?.is_equilibrium,
            Flavor::Tft => incentives::tft_equilibrium(&config.env, config.params.b)?.is_equilibrium,
        },
    })
}

pub fn run_sim(config: &SimConfig) -> Result<SimTrace, SimError> {
    config.validate()?;
    Engine::new(config)?.run()
}

/// Run the binary-reputation tit-for-tat baseline with the settings of `config`.
pub fn run_tft(config: &SimConfig) -> Result<SimTrace, SimError> {
    let mut cfg = config.clone();
    cfg.flavor = Flavor::Tft;
    run_sim(&cfg)
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    peers: Vec<Peer>,
    tracker: ChaCha8Rng,
    complying: bool,
    levels: usize,
    k: usize,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self, SimError> {
        let complying = peers_comply(cfg)?;
        let (recip, altruists, malicious) = cfg.population();
        let top = cfg.max_rep();
        let mut tracker = rng_for(cfg.seed, 0);
        let agent = match cfg.flavor {
            Flavor::SocialNorm => PeerKind::Reciprocative,
            Flavor::Tft => PeerKind::TftAgent,
        };
        let mut reps = vec![0u32; recip];
        let mut mal_reps = vec![0u32; malicious];
        if cfg.initial == InitialReputations::Stationary && cfg.flavor == Flavor::SocialNorm {
            let base = NetworkEnv { p_c: 0.0, p_d: 0.0, ..cfg.env };
            let omega = stationary::stationary_reciprocative(&cfg.params, &base).map_err(IncentiveError::from)?;
            reps = expand(&apportion(&omega.eta, recip));
            reps.shuffle(&mut tracker);
            if malicious > 0 && cfg.params.is_harsh_uniform() {
                mal_reps = expand(&apportion(&stationary::malicious_cycle(&cfg.params), malicious));
                mal_reps.shuffle(&mut tracker);
            }
        }
        if let Some(d) = cfg.deviant {
            reps[d.peer] = d.start_rep;
        }
        let mut peers = Vec::with_capacity(cfg.n_peers);
        for (i, rep) in reps.into_iter().enumerate() {
            peers.push((agent, rep, i));
        }
        for i in 0..altruists {
            peers.push((PeerKind::Altruistic, top, recip + i));
        }
        for (i, rep) in mal_reps.into_iter().enumerate() {
            peers.push((PeerKind::Malicious, rep, recip + altruists + i));
        }
        let peers = peers
            .into_iter()
            .map(|(kind, rep, id)| Peer {
                kind,
                rep,
                rng: rng_for(cfg.seed, id as u64 + 1),
            })
            .collect();
        Ok(Engine {
            cfg,
            peers,
            tracker,
            complying,
            levels: top as usize + 1,
            k: cfg.requests_per_peer(),
        })
    }

    fn prescribed(&self, server: u32, client: u32) -> bool {
        match self.cfg.flavor {
            Flavor::SocialNorm => {
                social_strategy(&self.cfg.params, Reputation(server), Reputation(client)) == Action::Serve
            }
            Flavor::Tft => client == 1,
        }
    }

    fn disposition(&self, id: usize, period: usize) -> Disposition {
        let peer = &self.peers[id];
        match peer.kind {
            PeerKind::Altruistic | PeerKind::Malicious => return Disposition::ServeAll,
            _ => {}
        }
        if let Some(d) = self.cfg.deviant.filter(|d| d.peer == id) {
            match d.mode {
                DeviationMode::Comply => {}
                DeviationMode::RefuseAll => return Disposition::Refuse,
                DeviationMode::ServeAll => return Disposition::ServeAll,
                DeviationMode::DeviateFirstPeriod if period == 0 => {
                    let active = match self.cfg.flavor {
                        Flavor::SocialNorm => d.start_rep >= self.cfg.params.h_o,
                        Flavor::Tft => true,
                    };
                    return if active { Disposition::Refuse } else { Disposition::ServeAll };
                }
                DeviationMode::DeviateFirstPeriod => {}
            }
        }
        if self.complying {
            Disposition::Follow
        } else {
            Disposition::Refuse
        }
    }

    fn capacity(&self, kind: PeerKind) -> u32 {
        if kind == PeerKind::Malicious {
            return u32::MAX;
        }
        match self.cfg.capacity {
            UploadCapacity::Matched => self.k as u32,
            UploadCapacity::Unlimited => u32::MAX,
            UploadCapacity::Fixed(c) => c,
        }
    }

    fn run(mut self) -> Result<SimTrace, SimError> {
        let cfg = self.cfg;
        let n = cfg.n_peers;
        let env = cfg.env;
        let window = cfg.window_len();
        let window_start = cfg.n_periods - window;
        let mut pools = Pools::new(self.levels, n);
        let mut periods = Vec::new();
        let mut discounted = vec![0.0; n];
        let mut window_utility = vec![0.0; n];
        let mut eta_sum = vec![0.0; self.levels];
        let mut window_counts = Counts::default();
        let mut recip_requests = 0u64;
        let mut recip_received = 0u64;
        let mut mutual_received = 0u64;
        let mut active_series = Vec::new();
        let mut kind_series: Vec<Vec<f64>> = vec![Vec::new(); KIND_ORDER.len()];
        let mut max_altruist_uploads = 0u32;
        let mut discount = 1.0;

        let mut x = vec![0u8; n];
        let mut remaining = vec![0u32; n];
        let mut accepting = vec![false; n];
        let mut utility = vec![0.0; n];
        let mut received = vec![0u64; n];
        let mut uploads = vec![0u32; n];
        let mut requests: Vec<usize> = Vec::with_capacity(n * self.k);
        let max_rep = cfg.max_rep() as usize;

        for t in 0..cfg.n_periods {
            x.iter_mut().for_each(|v| *v = 0);
            utility.iter_mut().for_each(|v| *v = 0.0);
            received.iter_mut().for_each(|v| *v = 0);
            uploads.iter_mut().for_each(|v| *v = 0);
            let mut mutual = 0u64;
            let start_reps: Vec<u32> = self.peers.iter().map(|p| p.rep).collect();
            let mut tally = vec![0usize; self.levels];
            for &r in &start_reps {
                tally[r as usize] += 1;
            }
            let hist: Vec<f64> = tally.iter().map(|&c| c as f64 / n as f64).collect();

            pools.clear();
            for id in 0..n {
                let disp = self.disposition(id, t);
                let kind = self.peers[id].kind;
                remaining[id] = self.capacity(kind);
                accepting[id] = disp != Disposition::Refuse;
                let server_rep = start_reps[id];
                for client_rep in 0..=max_rep {
                    let member = match disp {
                        Disposition::ServeAll => true,
                        Disposition::Follow | Disposition::Refuse => self.prescribed(server_rep, client_rep as u32),
                    };
                    if member && remaining[id] > 0 {
                        pools.insert(client_rep, id);
                    }
                }
            }

            requests.clear();
            for (id, p) in self.peers.iter().enumerate() {
                if matches!(p.kind, PeerKind::Reciprocative | PeerKind::TftAgent) {
                    requests.extend(std::iter::repeat(id).take(self.k));
                }
            }
            requests.shuffle(&mut self.tracker);

            let mut counts = Counts {
                requests: requests.len() as u64,
                ..Counts::default()
            };
            for &client in &requests {
                let level = start_reps[client] as usize;
                loop {
                    let pool = &pools.members[level];
                    if pool.is_empty() || (pool.len() == 1 && pool[0] == client) {
                        counts.unserved += 1;
                        break;
                    }
                    let server = pool[self.peers[client].rng.gen_range(0..pool.len())];
                    if server == client {
                        continue;
                    }
                    let owed = self.prescribed(start_reps[server], start_reps[client]);
                    if !accepting[server] {
                        // only peers owing service sit in a pool while refusing
                        x[server] = 1;
                        counts.refused += 1;
                        pools.remove(server);
                        continue;
                    }
                    if self.peers[server].kind == PeerKind::Malicious {
                        counts.corrupted += 1;
                        if owed {
                            x[server] = 1;
                        }
                    } else {
                        utility[server] -= env.c;
                        uploads[server] += 1;
                        let failed = env.eps > 0.0 && self.peers[server].rng.gen::<f64>() < env.eps;
                        if failed {
                            counts.errored += 1;
                            if owed {
                                x[server] = 1;
                            }
                        } else {
                            counts.served += 1;
                            utility[client] += env.r;
                            received[client] += 1;
                            if matches!(self.peers[server].kind, PeerKind::Reciprocative | PeerKind::TftAgent) {
                                mutual += 1;
                            }
                            if !owed {
                                x[server] = 1;
                            }
                        }
                        if remaining[server] != u32::MAX {
                            remaining[server] -= 1;
                            if remaining[server] == 0 {
                                pools.remove(server);
                            }
                        }
                    }
                    break;
                }
            }

            for id in 0..n {
                let p = &mut self.peers[id];
                match p.kind {
                    PeerKind::Altruistic => {
                        max_altruist_uploads = max_altruist_uploads.max(uploads[id]);
                    }
                    _ => {
                        p.rep = match cfg.flavor {
                            Flavor::Tft => u32::from(x[id] == 0),
                            Flavor::SocialNorm => {
                                let params = &cfg.params;
                                let forgiven = if x[id] == 1 {
                                    let f = params.forgiveness_prob(p.rep);
                                    f > 0.0 && p.rng.gen::<f64>() < f
                                } else {
                                    false
                                };
                                crate::model::reputation_update(params, Reputation(p.rep), x[id], forgiven).0
                            }
                        };
                    }
                }
                discounted[id] += discount * utility[id];
            }
            discount *= env.delta;

            let active_threshold = match cfg.flavor {
                Flavor::SocialNorm => cfg.params.h_o,
                Flavor::Tft => 1,
            };
            let active: Vec<f64> = (0..n)
                .filter(|&i| {
                    matches!(self.peers[i].kind, PeerKind::Reciprocative | PeerKind::TftAgent)
                        && start_reps[i] >= active_threshold
                })
                .map(|i| utility[i])
                .collect();
            let active_utility = (!active.is_empty()).then(|| active.iter().sum::<f64>() / active.len() as f64);
            let kind_utility: Vec<Option<f64>> = KIND_ORDER
                .iter()
                .map(|&kind| {
                    let vals: Vec<f64> = (0..n).filter(|&i| self.peers[i].kind == kind).map(|i| utility[i]).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect();

            if t >= window_start {
                for (s, h) in eta_sum.iter_mut().zip(&hist) {
                    *s += h;
                }
                window_counts.add(&counts);
                mutual_received += mutual;
                for i in 0..n {
                    window_utility[i] += utility[i];
                    if matches!(self.peers[i].kind, PeerKind::Reciprocative | PeerKind::TftAgent) {
                        recip_requests += self.k as u64;
                        recip_received += received[i];
                    }
                }
                if let Some(a) = active_utility {
                    active_series.push(a);
                }
                for (series, u) in kind_series.iter_mut().zip(&kind_utility) {
                    if let Some(u) = u {
                        series.push(*u);
                    }
                }
            }
            if cfg.record_periods {
                periods.push(PeriodRecord {
                    period: t,
                    eta_hat: hist,
                    counts,
                    active_utility,
                    kind_utility,
                });
            }
        }

        let eta_hat: Vec<f64> = eta_sum.iter().map(|s| s / window as f64).collect();
        let threshold = match cfg.flavor {
            Flavor::SocialNorm => cfg.params.h_o as usize,
            Flavor::Tft => 1,
        };
        let mu_hat = eta_hat[threshold..].iter().sum();
        let (active_mean, active_se) = batch_mean(&active_series);
        let kinds = KIND_ORDER
            .iter()
            .zip(&kind_series)
            .filter_map(|(&kind, series)| {
                let ids: Vec<usize> = (0..n).filter(|&i| self.peers[i].kind == kind).collect();
                if ids.is_empty() {
                    return None;
                }
                let (_, se) = batch_mean(series);
                let total: f64 = ids.iter().map(|&i| window_utility[i]).sum();
                Some(KindSummary {
                    kind,
                    count: ids.len(),
                    mean_utility: total / (ids.len() * window) as f64,
                    std_err: se,
                    mean_discounted: ids.iter().map(|&i| discounted[i]).sum::<f64>() / ids.len() as f64,
                })
            })
            .collect();
        let u_max = self.k as f64 * (env.r + env.c) + if self.cfg.capacity == UploadCapacity::Unlimited {
            n as f64 * self.k as f64 * env.c
        } else {
            0.0
        };
        let truncation_bound = if env.delta < 1.0 {
            env.delta.powi(cfg.n_periods as i32) * u_max / (1.0 - env.delta)
        } else {
            f64::INFINITY
        };
        let summary = SimSummary {
            window_start,
            eta_hat,
            mu_hat,
            delivery_rate: ratio(recip_received, recip_requests),
            mutual_rate: ratio(mutual_received, recip_requests),
            active_utility: active_mean,
            active_utility_se: active_se,
            kinds,
            counts: window_counts,
            max_altruist_uploads,
            truncation_bound,
            complying: self.complying,
        };
        Ok(SimTrace {
            config: cfg.clone(),
            periods,
            summary,
            discounted,
            final_reps: self.peers.iter().map(|p| p.rep).collect(),
        })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn expand(counts: &[usize]) -> Vec<u32> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(rep, &c)| std::iter::repeat(rep as u32).take(c))
        .collect()
}

/// Mean and batch-means standard error of a series. Windows too short for two
/// batches fall back to the i.i.d. estimate, and a single point reports zero.
fn batch_mean(series: &[f64]) -> (f64, f64) {
    if series.is_empty() {
        return (0.0, 0.0);
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let batches: Vec<f64> = series
        .chunks(BATCH)
        .filter(|c| c.len() == BATCH)
        .map(|c| c.iter().sum::<f64>() / BATCH as f64)
        .collect();
    if batches.len() < 2 {
        if series.len() < 2 {
            return (mean, 0.0);
        }
        let n = series.len() as f64;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        return (mean, (var / n).sqrt());
    }
    let bm = batches.iter().sum::<f64>() / batches.len() as f64;
    let var = batches.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (batches.len() - 1) as f64;
    (mean, (var / batches.len() as f64).sqrt())
}

/// Paired-seed estimate of a tagged peer's gain from a one-shot deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationGain {
    pub mean: f64,
    pub std_err: f64,
    pub pairs: usize,
}

/// Discounted utility of peer 0 deviating once at reputation `theta` minus
/// that of complying, over `pairs` seeds starting at `config.seed`. Both runs
/// of a pair share the seed.
pub fn measure_deviation_gain(config: &SimConfig, theta: u32, pairs: usize) -> Result<DeviationGain, SimError> {
    use rayon::prelude::*;
    let mut base = config.clone();
    base.record_periods = false;
    let gains: Vec<f64> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let run = |mode| -> Result<f64, SimError> {
                let mut cfg = base.clone();
                cfg.seed = config.seed.wrapping_add(i);
                cfg.deviant = Some(DeviantPolicy {
                    peer: 0,
                    start_rep: theta,
                    mode,
                });
                Ok(run_sim(&cfg)?.discounted[0])
            };
            Ok(run(DeviationMode::DeviateFirstPeriod)? - run(DeviationMode::Comply)?)
        })
        .collect::<Result<_, SimError>>()?;
    let m = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / m;
    let var = if gains.len() > 1 {
        gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(DeviationGain {
        mean,
        std_err: (var / m).sqrt(),
        pairs,
    })
}
