//! Subcommand implementations. Each one evaluates a scenario, writes the
//! requested outputs and reports how the process should exit.

use std::io;
use std::path::PathBuf;

use normforge::designer::{self, DesignResult, Problem};
use normforge::incentives::{self, IncentiveError, IncentiveReport, Regime};
use normforge::sim::{self, Flavor, SimTrace};
use normforge::stationary::{self, StationaryError};
use normforge::{NetworkEnv, ProtocolParams};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{qualify, ConfigError, Scenario, SweepTarget};
use crate::table::{join, write_csv, write_json, Row};

/// Connection cap used by `check` when the scenario has no design section.
pub const DEFAULT_B_CAP: u32 = 64;

#[derive(Debug, Error)]
pub enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Model(String),
}

/// Non-error outcomes that still map to distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// No feasible design, or the norm is not an equilibrium.
    Infeasible,
    /// Empirical reputations stayed too far from the analytic distribution.
    NotConverged,
}

fn model_err(section: &str, e: IncentiveError) -> CmdError {
    match e {
        IncentiveError::Param(p) | IncentiveError::Stationary(StationaryError::Param(p)) => qualify(section, &p).into(),
        IncentiveError::MixedPopulation => ConfigError::new("env.p_d", e.to_string()).into(),
        IncentiveError::NeedsUniformThresholds(_) => ConfigError::new("params.m_o", e.to_string()).into(),
        other => CmdError::Model(other.to_string()),
    }
}

/// Where results go: explicit paths, otherwise the command's fallback format on standard output.
struct Sinks {
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum Fallback {
    Json,
    Csv,
}

impl Sinks {
    fn of(s: &Scenario, fallback: Fallback) -> Sinks {
        let (json, csv) = (s.output.json.clone(), s.output.csv.clone());
        if json.is_none() && csv.is_none() {
            let stdout = Some(PathBuf::from("-"));
            return match fallback {
                Fallback::Json => Sinks { json: stdout, csv: None },
                Fallback::Csv => Sinks { json: None, csv: stdout },
            };
        }
        Sinks { json, csv }
    }

    fn write<T: Serialize>(&self, json: &T, rows: &[Row]) -> io::Result<()> {
        if let Some(p) = &self.json {
            write_json(p, json)?;
        }
        if let Some(p) = &self.csv {
            write_csv(p, rows)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzePoint {
    pub params: ProtocolParams,
    pub env: NetworkEnv,
    pub regime: Regime,
    pub eta: Vec<f64>,
    pub mu: f64,
    pub alpha: f64,
    pub v_one: Vec<f64>,
    pub v_inf: Vec<f64>,
    pub social_utility: f64,
    pub incentives: IncentiveReport,
}

fn analyze_point(params: &ProtocolParams, env: &NetworkEnv) -> Result<AnalyzePoint, CmdError> {
    let regime = incentives::regime(params, env).map_err(|e| model_err("params", e))?;
    let dist = stationary::stationary(params, env).map_err(|e| model_err("params", e.into()))?;
    let util = incentives::overall_utilities(params, env).map_err(|e| model_err("params", e))?;
    let report = incentives::check_equilibrium(params, env).map_err(|e| model_err("params", e))?;
    Ok(AnalyzePoint {
        params: params.clone(),
        env: *env,
        regime,
        eta: dist.eta,
        mu: dist.mu,
        alpha: dist.alpha,
        v_one: util.v_one,
        v_inf: util.v_inf,
        social_utility: util.social_utility,
        incentives: report,
    })
}

fn analyze_row(p: &AnalyzePoint) -> Row {
    let mut row = Row::default();
    row.env(&p.env)
        .params(Some(&p.params))
        .put("regime", format!("{:?}", p.regime))
        .put("mu", p.mu)
        .put("alpha", p.alpha)
        .put("eta", join(&p.eta))
        .put("social_utility", p.social_utility)
        .put("serve_slack", p.incentives.serve_slack)
        .put("refuse_slack", p.incentives.refuse_slack)
        .put("serve_margin", p.incentives.serve_margin)
        .put("is_equilibrium", p.incentives.is_equilibrium);
    row
}

#[derive(Serialize)]
struct Report<'a, T> {
    scenario: &'a Scenario,
    result: T,
}

pub fn analyze(s: &Scenario) -> Result<Outcome, CmdError> {
    let params = s.require_params()?;
    let point = analyze_point(&params, &s.env)?;
    let resolved = s.resolved();
    Sinks::of(s, Fallback::Json).write(&Report { scenario: &resolved, result: &point }, &[analyze_row(&point)])?;
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    /// Smallest uniform service threshold that sustains cooperation.
    pub min_service_threshold: Option<u32>,
    /// Largest cost-to-benefit ratio any norm of this reputation range sustains.
    pub cost_threshold: f64,
    /// Smallest discount factor at which some norm of this range is sustainable.
    pub discount_threshold: Option<f64>,
    /// Largest sustainable number of connections up to `b_cap`.
    pub max_connections: Option<u32>,
    pub b_cap: u32,
    /// Largest sustainable forgiveness base.
    pub max_forgiveness: Option<f64>,
    /// Largest altruist fraction under which the norm stays sustainable.
    pub max_altruist_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub params: ProtocolParams,
    pub env: NetworkEnv,
    pub regime: Regime,
    pub incentives: IncentiveReport,
    /// Same test for the binary tit-for-tat baseline with `b` connections.
    pub tft: IncentiveReport,
    pub bounds: Bounds,
}

/// Bounds that do not exist for this norm shape are reported as absent.
fn optional<T>(r: Result<T, IncentiveError>) -> Result<Option<T>, CmdError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(IncentiveError::NeedsUniformThresholds(_) | IncentiveError::NeverSatisfiable) => Ok(None),
        Err(e) => Err(model_err("params", e)),
    }
}

pub fn check(s: &Scenario) -> Result<Outcome, CmdError> {
    let params = s.require_params()?;
    let env = s.env;
    let b_cap = s.design.as_ref().map_or(DEFAULT_B_CAP, |d| d.b_cap);
    let regime = incentives::regime(&params, &env).map_err(|e| model_err("params", e))?;
    let report = incentives::check_equilibrium(&params, &env).map_err(|e| model_err("params", e))?;
    let tft = incentives::tft_equilibrium(&env, params.b).map_err(|e| model_err("params", e))?;
    let bounds = Bounds {
        min_service_threshold: incentives::min_service_threshold(&env, params.b, params.l),
        cost_threshold: incentives::existence_cost_threshold(&env, params.l),
        discount_threshold: optional(incentives::existence_discount_threshold(&env, params.l))?,
        max_connections: optional(incentives::max_connections(&env, &params, b_cap))?.flatten(),
        b_cap,
        max_forgiveness: optional(incentives::max_forgiveness(&params, &env))?.flatten(),
        max_altruist_fraction: if env.p_d > 0.0 {
            None
        } else {
            optional(incentives::max_altruist_fraction(&params, &env))?
        },
    };
    let result = CheckResult {
        params,
        env,
        regime,
        incentives: report,
        tft,
        bounds,
    };
    let mut row = Row::default();
    row.env(&result.env)
        .params(Some(&result.params))
        .put("regime", format!("{:?}", result.regime))
        .put("is_equilibrium", result.incentives.is_equilibrium)
        .put("serve_slack", result.incentives.serve_slack)
        .put("refuse_slack", result.incentives.refuse_slack)
        .put("serve_margin", result.incentives.serve_margin)
        .put("tft_is_equilibrium", result.tft.is_equilibrium)
        .opt("min_service_threshold", result.bounds.min_service_threshold)
        .put("cost_threshold", result.bounds.cost_threshold)
        .opt("discount_threshold", result.bounds.discount_threshold)
        .opt("max_connections", result.bounds.max_connections)
        .put("b_cap", b_cap)
        .opt("max_forgiveness", result.bounds.max_forgiveness)
        .opt("max_altruist_fraction", result.bounds.max_altruist_fraction);
    let ok = result.incentives.is_equilibrium;
    let resolved = s.resolved();
    Sinks::of(s, Fallback::Json).write(&Report { scenario: &resolved, result: &result }, &[row])?;
    Ok(if ok { Outcome::Success } else { Outcome::Infeasible })
}

fn solve_point(s: &Scenario) -> Result<DesignResult, CmdError> {
    let spec = s.require_design()?.spec(s.env);
    designer::solve(&spec).map_err(|e| model_err("design", e))
}

fn solve_row(s: &Scenario, r: &DesignResult) -> Row {
    let d = s.design.as_ref().expect("solve rows come from design scenarios");
    let p = r.params.as_ref();
    let mut row = Row::default();
    row.put("problem", problem_name(r.problem))
        .put("L", d.l)
        .put("b_cap", d.b_cap)
        .env(&s.env)
        .put("feasible", r.feasible)
        .opt("h_o", p.map(|p| p.h_o))
        .opt("m_o", p.map(|p| join(&p.m_o)))
        .opt("beta", p.map(|p| p.beta))
        .opt("b", p.map(|p| p.b))
        .opt("pc_star", r.pc_star)
        .put("utility", r.utility)
        .put("altruist_saturated", r.altruist_saturated)
        .put("candidates", r.search_log.len());
    row
}

fn problem_name(p: Problem) -> &'static str {
    match p {
        Problem::Osne => "OSNE",
        Problem::OsneVp => "OSNE_VP",
        Problem::OsneVps => "OSNE_VPS",
        Problem::OsneAh => "OSNE_AH",
    }
}

pub fn solve(s: &Scenario) -> Result<Outcome, CmdError> {
    let result = solve_point(s)?;
    let resolved = s.resolved();
    Sinks::of(s, Fallback::Json).write(&Report { scenario: &resolved, result: &result }, &[solve_row(s, &result)])?;
    Ok(if result.feasible { Outcome::Success } else { Outcome::Infeasible })
}

/// Every grid point of the sweep, first axis slowest.
fn grid(s: &Scenario) -> Result<Vec<Scenario>, CmdError> {
    let Some(sweep) = &s.sweep else {
        return Ok(vec![s.clone()]);
    };
    let mut points = vec![s.clone()];
    for (i, axis) in sweep.axes.iter().enumerate() {
        let at = format!("sweep.axes[{i}]");
        let values = axis.points(&at)?;
        let mut next = Vec::with_capacity(points.len() * values.len());
        for p in &points {
            for &v in &values {
                next.push(p.with_value(&axis.param, v, &at)?);
            }
        }
        points = next;
    }
    let names: Vec<&str> = sweep.axes.iter().map(|a| a.param.as_str()).collect();
    for p in &mut points {
        p.sweep = None;
        p.validate().map_err(|e| ConfigError {
            message: format!("at sweep point {}: {}", describe(p, &names), e.message),
            field: e.field,
        })?;
    }
    Ok(points)
}

fn describe(s: &Scenario, names: &[&str]) -> String {
    let p = s.params.as_ref();
    let d = s.design.as_ref();
    names
        .iter()
        .map(|&n| {
            let v = match n {
                "r" => s.env.r.to_string(),
                "c" => s.env.c.to_string(),
                "c_over_r" => (s.env.c / s.env.r).to_string(),
                "eps" => s.env.eps.to_string(),
                "lambda" => s.env.lambda.to_string(),
                "delta" => s.env.delta.to_string(),
                "p_c" => s.env.p_c.to_string(),
                "p_d" => s.env.p_d.to_string(),
                "L" => p.map(|p| p.l).or(d.map(|d| d.l)).unwrap_or_default().to_string(),
                "h_o" => p.map_or(0, |p| p.h_o).to_string(),
                "b" => p.map_or(0, |p| p.b).to_string(),
                "beta" => p.map_or(0.0, |p| p.beta).to_string(),
                _ => d.map_or(0, |d| d.b_cap).to_string(),
            };
            format!("{n}={v}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Serialize)]
#[serde(untagged)]
enum SweepPoint {
    Analyze(AnalyzePoint),
    Solve { env: NetworkEnv, result: DesignResult },
}

pub fn sweep(s: &Scenario) -> Result<Outcome, CmdError> {
    let target = match s.sweep.as_ref().and_then(|w| w.target) {
        Some(t) => t,
        None if s.design.is_some() => SweepTarget::Solve,
        None => SweepTarget::Analyze,
    };
    match target {
        SweepTarget::Analyze => s.require_params().map(drop)?,
        SweepTarget::Solve => s.require_design().map(drop)?,
    }
    let points = grid(s)?;
    let evaluated: Vec<(SweepPoint, Row)> = points
        .par_iter()
        .map(|p| match target {
            SweepTarget::Analyze => {
                let a = analyze_point(&p.require_params()?, &p.env)?;
                let row = analyze_row(&a);
                Ok((SweepPoint::Analyze(a), row))
            }
            SweepTarget::Solve => {
                let mut r = solve_point(p)?;
                let row = solve_row(p, &r);
                // logs of every point would dwarf the table; `solve` keeps them
                r.search_log.clear();
                Ok((SweepPoint::Solve { env: p.env, result: r }, row))
            }
        })
        .collect::<Result<_, CmdError>>()?;
    let (json, rows): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();
    let resolved = s.resolved();
    Sinks::of(s, Fallback::Csv).write(&Report { scenario: &resolved, result: json }, &rows)?;
    Ok(Outcome::Success)
}

/// Tolerance on `‖η̂ - η‖∞` for a population of `n` peers and `L + 1` levels.
pub fn convergence_tol(l: u32, n: usize) -> f64 {
    (3.0 * (l as f64 / n as f64).sqrt()).max(0.02)
}

fn sim_row(trace: &SimTrace, linf: Option<(f64, f64)>) -> Row {
    let c = &trace.config;
    let s = &trace.summary;
    let mut row = Row::default();
    row.put("flavor", format!("{:?}", c.flavor))
        .put("seed", c.seed)
        .put("n_peers", c.n_peers)
        .put("n_periods", c.n_periods)
        .put("behavior", format!("{:?}", c.behavior))
        .env(&c.env)
        .params(Some(&c.params))
        .put("complying", s.complying)
        .put("window_start", s.window_start)
        .put("mu_hat", s.mu_hat)
        .put("delivery_rate", s.delivery_rate)
        .put("mutual_rate", s.mutual_rate)
        .put("active_utility", s.active_utility)
        .put("active_utility_se", s.active_utility_se)
        .put("requests", s.counts.requests)
        .put("served", s.counts.served)
        .put("errored", s.counts.errored)
        .put("corrupted", s.counts.corrupted)
        .put("unserved", s.counts.unserved)
        .put("refused", s.counts.refused);
    match c.flavor {
        Flavor::SocialNorm => {
            row.put("eta_hat", join(&s.eta_hat));
        }
        Flavor::Tft => {
            row.put("rep0_share", s.eta_hat[0]).put("rep1_share", s.eta_hat[1]);
        }
    }
    if let Some((d, tol)) = linf {
        row.put("linf_eta", d).put("linf_tol", tol);
    }
    row
}

pub fn simulate(s: &Scenario) -> Result<Outcome, CmdError> {
    let params = s.require_params()?;
    let input = s.require_sim()?;
    if input.compare && input.flavor == Flavor::Tft {
        return Err(ConfigError::new("sim.compare", "no analytic distribution exists for the binary baseline").into());
    }
    let analytic = if input.compare {
        Some(stationary::stationary(&params, &s.env).map_err(|e| model_err("params", e.into()))?)
    } else {
        None
    };
    let traces: Vec<SimTrace> = (0..input.replicas)
        .into_par_iter()
        .map(|i| {
            let cfg = input.config(input.seed + i, params.clone(), s.env);
            sim::run_sim(&cfg).map_err(|e| CmdError::Model(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let tol = convergence_tol(params.l, input.n_peers);
    let mut converged = true;
    let rows: Vec<Row> = traces
        .iter()
        .map(|t| {
            let linf = analytic.as_ref().map(|a| (a.linf(&t.summary.eta_hat), tol));
            if let Some((d, tol)) = linf {
                converged &= d <= tol;
            }
            sim_row(t, linf)
        })
        .collect();
    let sinks = Sinks::of(s, Fallback::Json);
    if traces.len() == 1 {
        sinks.write(&traces[0], &rows)?;
    } else {
        sinks.write(&traces, &rows)?;
    }
    Ok(if converged { Outcome::Success } else { Outcome::NotConverged })
}

#[derive(Serialize)]
struct CompareEntry {
    flavor: Flavor,
    env: NetworkEnv,
    params: ProtocolParams,
    analytic_equilibrium: bool,
    summary: sim::SimSummary,
}

pub fn compare(s: &Scenario) -> Result<Outcome, CmdError> {
    s.require_params()?;
    let input = s.require_sim()?;
    let points = grid(s)?;
    let jobs: Vec<(&Scenario, Flavor)> = points
        .iter()
        .flat_map(|p| [(p, Flavor::SocialNorm), (p, Flavor::Tft)])
        .collect();
    let entries: Vec<CompareEntry> = jobs
        .par_iter()
        .map(|&(p, flavor)| {
            let params = p.require_params()?;
            let analytic = match flavor {
                Flavor::SocialNorm => incentives::check_equilibrium(&params, &p.env),
                Flavor::Tft => incentives::tft_equilibrium(&p.env, params.b),
            }
            .map_err(|e| model_err("params", e))?
            .is_equilibrium;
            let mut cfg = input.config(input.seed, params.clone(), p.env);
            cfg.flavor = flavor;
            cfg.record_periods = false;
            let trace = sim::run_sim(&cfg).map_err(|e| CmdError::Model(e.to_string()))?;
            Ok(CompareEntry {
                flavor,
                env: p.env,
                params,
                analytic_equilibrium: analytic,
                summary: trace.summary,
            })
        })
        .collect::<Result<_, CmdError>>()?;
    let rows: Vec<Row> = entries
        .iter()
        .map(|e| {
            let mut row = Row::default();
            row.env(&e.env)
                .params(Some(&e.params))
                .put("flavor", format!("{:?}", e.flavor))
                .put("analytic_equilibrium", e.analytic_equilibrium)
                .put("complying", e.summary.complying)
                .put("mu_hat", e.summary.mu_hat)
                .put("delivery_rate", e.summary.delivery_rate)
                .put("mutual_rate", e.summary.mutual_rate)
                .put("active_utility", e.summary.active_utility)
                .put("active_utility_se", e.summary.active_utility_se);
            row
        })
        .collect();
    let resolved = s.resolved();
    Sinks::of(s, Fallback::Csv).write(&Report { scenario: &resolved, result: &entries }, &rows)?;
    Ok(Outcome::Success)
}

/// Write an error object for a failed command.
pub fn error_json(e: &CmdError) -> serde_json::Value {
    match e {
        CmdError::Config(c) => c.to_json(),
        CmdError::Io(err) => serde_json::json!({"error": {"kind": "io", "message": err.to_string()}}),
        CmdError::Model(m) => serde_json::json!({"error": {"kind": "model", "message": m}}),
    }
}
