//! Optimal protocol design: choose the norm parameters that maximize social
//! utility among those sustaining a social norm equilibrium.
//!
//! Four problems are supported. `Osne` searches `(h_o, b)` under harsh
//! punishment; `OsneVp` adds the forgiveness base `β`; `OsneVps` adds
//! reputation-dependent client thresholds `m_o`; `OsneAh` adds the fraction of
//! altruistic seeds `p_C`.
//!
//! Every solver has a pruned search and an exhaustive counterpart that checks
//! every candidate of the same grid. Candidate evaluation runs in parallel;
//! the incumbent is then chosen sequentially in candidate order, so results do
//! not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::incentives::{self, IncentiveError};
use crate::model::{NetworkEnv, ParamError, ProtocolParams};

/// Relative tolerance under which two utilities count as tied.
pub const UTILITY_TIE_TOL: f64 = 1e-12;
/// Largest `L` for which all client-threshold profiles are enumerated.
pub const FULL_THRESHOLD_ENUMERATION_MAX_L: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Problem {
    Osne,
    OsneVp,
    OsneVps,
    OsneAh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub problem: Problem,
    #[serde(rename = "L")]
    pub l: u32,
    pub b_cap: u32,
    #[serde(default = "default_grid")]
    pub beta_grid: f64,
    #[serde(default = "default_grid")]
    pub pc_grid: f64,
    /// Closed range of altruist fractions searched by `OsneAh`.
    #[serde(default = "default_pc_range")]
    pub pc_range: (f64, f64),
    /// Refine the winning `β` by bisection after the grid search.
    #[serde(default)]
    pub refine_beta: bool,
    /// Run the nested sweep exactly as the reference pseudocode states it (`Osne` only).
    #[serde(default)]
    pub literal_table3: bool,
    pub env: NetworkEnv,
}

fn default_grid() -> f64 {
    0.01
}

fn default_pc_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl DesignSpec {
    pub fn new(problem: Problem, l: u32, b_cap: u32, env: NetworkEnv) -> Self {
        DesignSpec {
            problem,
            l,
            b_cap,
            beta_grid: default_grid(),
            pc_grid: default_grid(),
            pc_range: default_pc_range(),
            refine_beta: false,
            literal_table3: false,
            env,
        }
    }

    pub fn with_beta_grid(mut self, step: f64) -> Self {
        self.beta_grid = step;
        self
    }

    pub fn with_pc_grid(mut self, step: f64) -> Self {
        self.pc_grid = step;
        self
    }

    pub fn with_pc_range(mut self, lo: f64, hi: f64) -> Self {
        self.pc_range = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.env.validate()?;
        if self.l < 1 {
            return Err(ParamError::invalid("L", "must be at least 1"));
        }
        if self.b_cap < 1 {
            return Err(ParamError::invalid("b_cap", "must be at least 1"));
        }
        if !(self.beta_grid > 0.0 && self.beta_grid <= 1.0) {
            return Err(ParamError::invalid("beta_grid", "must lie in (0, 1]"));
        }
        if !(self.pc_grid > 0.0 && self.pc_grid <= 1.0) {
            return Err(ParamError::invalid("pc_grid", "must lie in (0, 1]"));
        }
        let (lo, hi) = self.pc_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(ParamError::invalid("pc_range", "must be an ordered sub-range of [0, 1]"));
        }
        if self.problem == Problem::OsneAh && self.env.p_d > 0.0 {
            return Err(ParamError::invalid("p_d", "must be 0 when designing altruist fractions"));
        }
        Ok(())
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub params: ProtocolParams,
    pub p_c: f64,
    /// Smallest incentive slack over all reputations.
    pub slack: f64,
    pub utility: f64,
    pub feasible: bool,
    /// Admitted without an incentive check because altruists alone saturate demand.
    #[serde(default)]
    pub altruist_saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub problem: Problem,
    pub params: Option<ProtocolParams>,
    pub pc_star: Option<f64>,
    pub utility: f64,
    pub feasible: bool,
    pub altruist_saturated: bool,
    pub search_log: Vec<SearchEntry>,
}

impl DesignResult {
    fn from_log(problem: Problem, search_log: Vec<SearchEntry>) -> Self {
        let best = select_best(&search_log).map(|i| search_log[i].clone());
        match best {
            Some(e) => DesignResult {
                problem,
                pc_star: (problem == Problem::OsneAh).then_some(e.p_c),
                utility: e.utility,
                feasible: true,
                altruist_saturated: e.altruist_saturated,
                params: Some(e.params),
                search_log,
            },
            None => DesignResult {
                problem,
                params: None,
                pc_star: None,
                utility: 0.0,
                feasible: false,
                altruist_saturated: false,
                search_log,
            },
        }
    }
}

/// Index of the best feasible entry: highest utility, then smallest `h_o`,
/// largest `b`, largest `β`, lexicographically smallest `m_o`, smallest
/// `p_C`, earliest in the log.
fn select_best(log: &[SearchEntry]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in log.iter().enumerate() {
        if !e.feasible {
            continue;
        }
        let Some(j) = best else {
            best = Some(i);
            continue;
        };
        if preferred(e, &log[j]) {
            best = Some(i);
        }
    }
    best
}

fn preferred(a: &SearchEntry, b: &SearchEntry) -> bool {
    let tol = UTILITY_TIE_TOL * a.utility.abs().max(b.utility.abs()).max(1.0);
    if a.utility > b.utility + tol {
        return true;
    }
    if a.utility < b.utility - tol {
        return false;
    }
    let key = |e: &SearchEntry| (e.params.h_o, std::cmp::Reverse(e.params.b));
    if key(a) != key(b) {
        return key(a) < key(b);
    }
    if a.params.beta != b.params.beta {
        return a.params.beta > b.params.beta;
    }
    if a.params.m_o != b.params.m_o {
        return a.params.m_o < b.params.m_o;
    }
    a.p_c < b.p_c
}

fn evaluate(params: &ProtocolParams, env: &NetworkEnv) -> Result<SearchEntry, IncentiveError> {
    let report = incentives::check_equilibrium(params, env)?;
    let utility = incentives::overall_utilities(params, env)?.social_utility;
    Ok(SearchEntry {
        params: params.clone(),
        p_c: env.p_c,
        slack: report.serve_slack.min(report.refuse_slack),
        utility,
        feasible: report.is_equilibrium,
        altruist_saturated: false,
    })
}

fn evaluate_all(candidates: &[(ProtocolParams, NetworkEnv)]) -> Result<Vec<SearchEntry>, IncentiveError> {
    candidates.par_iter().map(|(p, e)| evaluate(p, e)).collect()
}

fn beta_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| (k as f64 * step).min(1.0)).collect();
    if *grid.last().unwrap() < 1.0 - 1e-12 {
        grid.push(1.0);
    }
    grid
}

fn pc_grid(spec: &DesignSpec) -> Vec<f64> {
    let (lo, hi) = spec.pc_range;
    let n = ((hi - lo) / spec.pc_grid + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| (lo + k as f64 * spec.pc_grid).min(hi)).collect();
    if *grid.last().unwrap() < hi - 1e-12 {
        grid.push(hi);
    }
    grid
}

/// All non-decreasing client-threshold profiles for service threshold `h_o`.
/// With `restricted`, thresholds take values in `{h_o, h_o + 1}` only.
pub fn threshold_profiles(l: u32, h_o: u32, restricted: bool) -> Vec<Vec<u32>> {
    let len = (l - h_o + 1) as usize;
    let top = if restricted { (h_o + 1).min(l) } else { l };
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(cur: &mut Vec<u32>, len: usize, lo: u32, top: u32, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in lo..=top {
            cur.push(v);
            rec(cur, len, v, top, out);
            cur.pop();
        }
    }
    rec(&mut cur, len, h_o, top, &mut out);
    out
}

/// Largest index `k` with `passes(grid[k])`, assuming feasibility is
/// monotone along the grid and holds at index 0.
fn last_passing<F>(len: usize, mut passes: F) -> Result<usize, IncentiveError>
where
    F: FnMut(usize) -> Result<bool, IncentiveError>,
{
    if passes(len - 1)? {
        return Ok(len - 1);
    }
    let (mut lo, mut hi) = (0, len - 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn solve(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    match spec.problem {
        Problem::Osne if spec.literal_table3 => solve_osne_table3(spec),
        Problem::Osne => solve_osne(spec),
        Problem::OsneVp => solve_osne_vp(spec),
        Problem::OsneVps => solve_osne_vps(spec),
        Problem::OsneAh => solve_osne_ah(spec),
    }
}

/// Brute-force counterpart of [`solve`] over the same candidate grid.
pub fn solve_exhaustive(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    spec.validate()?;
    let env = spec.env;
    let mut candidates = Vec::new();
    let betas = match spec.problem {
        Problem::Osne | Problem::OsneAh => vec![0.0],
        Problem::OsneVp | Problem::OsneVps => beta_grid(spec.beta_grid),
    };
    let pcs = if spec.problem == Problem::OsneAh { pc_grid(spec) } else { vec![env.p_c] };
    let mut saturated = Vec::new();
    for &p_c in &pcs {
        let e = NetworkEnv { p_c, ..env };
        for h in 1..=spec.l {
            let profiles = if spec.problem == Problem::OsneVps {
                threshold_profiles(spec.l, h, spec.l > FULL_THRESHOLD_ENUMERATION_MAX_L)
            } else {
                vec![vec![h; (spec.l - h + 1) as usize]]
            };
            for m_o in &profiles {
                for b in 1..=spec.b_cap {
                    for &beta in &betas {
                        let p = ProtocolParams::uniform(spec.l, h, b).with_thresholds(m_o.clone()).with_beta(beta);
                        if p_c > 0.5 {
                            saturated.push(saturated_entry(&p, &e));
                        } else {
                            candidates.push((p, e));
                        }
                    }
                }
            }
        }
    }
    let mut log = evaluate_all(&candidates)?;
    log.extend(saturated);
    Ok(DesignResult::from_log(spec.problem, log))
}

/// Harsh-punishment design of `(h_o, b)`.
pub fn solve_osne(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    spec.validate()?;
    let env = spec.env;
    let log = osne_log(spec, &env)?;
    Ok(DesignResult::from_log(Problem::Osne, log))
}

/// For each `h_o`, locate the largest sustainable `b` and evaluate every
/// `b` up to it (slack is non-increasing in `b`).
fn osne_log(spec: &DesignSpec, env: &NetworkEnv) -> Result<Vec<SearchEntry>, IncentiveError> {
    let bars: Vec<Option<u32>> = (1..=spec.l)
        .into_par_iter()
        .map(|h| incentives::max_connections(env, &ProtocolParams::uniform(spec.l, h, 1), spec.b_cap))
        .collect::<Result<_, _>>()?;
    let candidates: Vec<(ProtocolParams, NetworkEnv)> = (1..=spec.l)
        .zip(&bars)
        .filter_map(|(h, bar)| bar.map(|bar| (h, bar)))
        .flat_map(|(h, bar)| (1..=bar).map(move |b| (ProtocolParams::uniform(spec.l, h, b), *env)))
        .collect();
    evaluate_all(&candidates)
}

/// The nested sweep as written in the reference pseudocode, including the
/// connection counter that carries over between thresholds.
pub fn solve_osne_table3(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    spec.validate()?;
    let env = spec.env;
    let l = spec.l;
    let mut log = Vec::new();
    let base = NetworkEnv {
        p_c: 0.0,
        p_d: 0.0,
        ..env
    };
    let cost_ok = env.c / env.r <= incentives::existence_cost_threshold(&base, l);
    let delta_ok = match incentives::existence_discount_threshold(&base, l) {
        Ok(t) => env.delta >= t,
        Err(IncentiveError::NeverSatisfiable) => false,
        Err(e) => return Err(e),
    };
    if !(cost_ok && delta_ok) {
        return Ok(DesignResult::from_log(Problem::Osne, log));
    }
    let passes = |h: u32, b: u32| -> Result<bool, IncentiveError> {
        Ok(incentives::check_equilibrium(&ProtocolParams::uniform(l, h, b), &env)?.is_equilibrium)
    };
    let (mut h, mut b, mut flag) = (1u32, spec.b_cap as i64, false);
    while h <= l && !flag {
        while b >= 1 && !flag {
            flag = passes(h, b as u32)?;
            b -= 1;
        }
        h += 1;
    }
    let (h_sharp, b_sharp) = (h - 1, (b + 1).max(1) as u32);
    let mut picks = vec![(h_sharp, b_sharp)];
    if let Some(b_bar) = incentives::max_connections(&env, &ProtocolParams::uniform(l, h_sharp, 1), spec.b_cap)? {
        picks.push((h_sharp, b_bar));
    }
    if let Some(h_bar) = (1..=l).find(|&hh| passes(hh, b_sharp).unwrap_or(false)) {
        picks.push((h_bar, b_sharp));
    }
    for (hh, bb) in picks {
        log.push(evaluate(&ProtocolParams::uniform(l, hh, bb), &env)?);
    }
    Ok(DesignResult::from_log(Problem::Osne, log))
}

/// Forgiveness design: for each sustainable `(h_o, b)` pick the largest
/// feasible `β` on the grid (utility grows with `β`, slack shrinks).
/// With `refine_beta` the winner is refined by bisection towards the next grid point.
pub fn solve_osne_vp(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    spec.validate()?;
    let env = spec.env;
    let pairs: Vec<ProtocolParams> = osne_log(spec, &env)?
        .into_iter()
        .filter(|e| e.feasible)
        .map(|e| e.params)
        .collect();
    let log = forgiving_log(spec, &env, &pairs, true)?;
    Ok(DesignResult::from_log(Problem::OsneVp, log))
}

fn forgiving_log(
    spec: &DesignSpec,
    env: &NetworkEnv,
    bases: &[ProtocolParams],
    monotone: bool,
) -> Result<Vec<SearchEntry>, IncentiveError> {
    let grid = beta_grid(spec.beta_grid);
    let results: Vec<Option<SearchEntry>> = bases
        .par_iter()
        .map(|p| {
            let passes = |beta: f64| -> Result<bool, IncentiveError> {
                Ok(incentives::check_equilibrium(&p.clone().with_beta(beta), env)?.is_equilibrium)
            };
            let k = if monotone {
                Some(last_passing(grid.len(), |k| passes(grid[k]))?)
            } else {
                let mut found = None;
                for k in (0..grid.len()).rev() {
                    if passes(grid[k])? {
                        found = Some(k);
                        break;
                    }
                }
                found
            };
            let Some(k) = k else { return Ok(None) };
            let mut beta = grid[k];
            if spec.refine_beta && k + 1 < grid.len() {
                let (mut lo, mut hi) = (grid[k], grid[k + 1]);
                while hi - lo > incentives::SEARCH_TOL {
                    let mid = 0.5 * (lo + hi);
                    if passes(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                beta = lo;
            }
            evaluate(&p.clone().with_beta(beta), env).map(Some)
        })
        .collect::<Result<_, IncentiveError>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Threshold-profile design: every non-decreasing `m_o` (restricted to
/// `{h_o, h_o + 1}` for large `L`) jointly with `b` and `β`.
pub fn solve_osne_vps(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    solve_osne_vps_with(spec, spec.l > FULL_THRESHOLD_ENUMERATION_MAX_L)
}

/// Threshold-profile design with an explicit choice of profile family.
pub fn solve_osne_vps_with(spec: &DesignSpec, restricted: bool) -> Result<DesignResult, IncentiveError> {
    spec.validate()?;
    let env = spec.env;
    let mut bases = Vec::new();
    for h in 1..=spec.l {
        for m_o in threshold_profiles(spec.l, h, restricted) {
            for b in 1..=spec.b_cap {
                bases.push(ProtocolParams::uniform(spec.l, h, b).with_thresholds(m_o.clone()));
            }
        }
    }
    // slack need not be monotone in β once client thresholds vary, so scan the whole grid
    let log = forgiving_log(spec, &env, &bases, false)?;
    Ok(DesignResult::from_log(Problem::OsneVps, log))
}

fn saturated_entry(params: &ProtocolParams, env: &NetworkEnv) -> SearchEntry {
    let slack = incentives::check_equilibrium(params, env)
        .map(|r| r.serve_slack.min(r.refuse_slack))
        .unwrap_or(f64::NAN);
    SearchEntry {
        params: params.clone(),
        p_c: env.p_c,
        slack,
        utility: incentives::collapsed_social_utility(env, params.b),
        feasible: true,
        altruist_saturated: true,
    }
}

/// Altruist-fraction design. For `p_C > 0.5` altruists serve every request on
/// their own, so those candidates are admitted with the saturated utility
/// whatever the reciprocative peers do.
pub fn solve_osne_ah(spec: &DesignSpec) -> Result<DesignResult, IncentiveError> {
    spec.validate()?;
    let mut log = Vec::new();
    for p_c in pc_grid(spec) {
        let env = NetworkEnv { p_c, ..spec.env };
        if p_c > 0.5 {
            for h in 1..=spec.l {
                for b in 1..=spec.b_cap {
                    log.push(saturated_entry(&ProtocolParams::uniform(spec.l, h, b), &env));
                }
            }
        } else {
            log.extend(osne_log(spec, &env)?);
        }
    }
    Ok(DesignResult::from_log(Problem::OsneAh, log))
}

/// Best social utility at each altruist fraction of the grid, falling back to
/// the altruists-only utility where no norm is sustainable.
pub fn altruist_utility_curve(spec: &DesignSpec) -> Result<Vec<(f64, f64, bool)>, IncentiveError> {
    spec.validate()?;
    pc_grid(spec)
        .into_iter()
        .map(|p_c| {
            let env = NetworkEnv { p_c, ..spec.env };
            if p_c > 0.5 {
                return Ok((p_c, incentives::collapsed_social_utility(&env, spec.b_cap), false));
            }
            let res = DesignResult::from_log(Problem::OsneAh, osne_log(spec, &env)?);
            let collapsed = incentives::collapsed_social_utility(&env, spec.b_cap);
            Ok(if res.feasible && res.utility >= collapsed {
                (p_c, res.utility, true)
            } else {
                (p_c, collapsed, false)
            })
        })
        .collect()
}
