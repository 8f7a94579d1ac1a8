//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use rayon::prelude::*;

use normforge::designer::{self, DesignSpec, Problem};
use normforge::incentives::{self, SLACK_TOL};
use normforge::model::{error_punish_prob, NetworkEnv, ProtocolParams};
use normforge::sim::{self, Behavior, InitialReputations, SimConfig};
use normforge::stationary;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn env(r: f64, c: f64, eps: f64, lambda: f64, delta: f64) -> NetworkEnv {
    NetworkEnv::new(r, c, eps, lambda, delta)
}

// ---------------------------------------------------------------- criterion 1

fn closed_form_vs_fixed_point() -> Outcome {
    let mut cases = Vec::new();
    for l in 1..=6u32 {
        for h in 1..=l {
            for eps in [0.0, 0.05, 0.1, 0.3] {
                for b in 1..=10u32 {
                    cases.push((l, h, eps, b));
                }
            }
        }
    }
    let worst = cases
        .par_iter()
        .map(|&(l, h, eps, b)| {
            let p = ProtocolParams::uniform(l, h, b);
            let e = env(1.0, 0.2, eps, 1.0, 0.8);
            let cf = stationary::stationary_closed_form(&p, &e).unwrap();
            let fp = stationary::stationary_fixed_point(&p, &e).unwrap();
            linf(&cf.eta, &fp.eta)
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        worst <= 1e-10,
        format!("{} configs, max L-inf distance {worst:.2e} (tolerance 1e-10)", cases.len()),
    )
}

// ---------------------------------------------------------------- criterion 2

fn monte_carlo_vs_analytic() -> Outcome {
    let configs = [
        (3u32, 1u32, 2u32, 0.1),
        (3, 3, 1, 0.05),
        (4, 2, 3, 0.1),
        (5, 2, 1, 0.3),
        (6, 4, 2, 0.02),
    ];
    let rows: Vec<(f64, f64)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, &(l, h, b, eps))| {
            let p = ProtocolParams::uniform(l, h, b);
            let e = env(1.0, 0.2, eps, 1.0, 0.8);
            let mut cfg = SimConfig::new(2000, 5000, 1000 + i as u64, p.clone(), e);
            cfg.window = 1000;
            cfg.record_periods = false;
            let trace = sim::run_sim(&cfg).unwrap();
            let cf = stationary::stationary_closed_form(&p, &e).unwrap();
            let mu = 1.0 / (1.0 + error_punish_prob(&e, b) * h as f64);
            (linf(&trace.summary.eta_hat, &cf.eta), (trace.summary.mu_hat - mu).abs())
        })
        .collect();
    let d_eta = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let d_mu = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        d_eta <= 0.02 && d_mu <= 0.01,
        format!("5 configs, max L-inf(eta) {d_eta:.4} (<= 0.02), max |mu error| {d_mu:.4} (<= 0.01)"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn threshold_formulas_vs_sweeps() -> Outcome {
    let mut points = Vec::new();
    for eps in [0.0, 0.05, 0.1, 0.2, 0.3] {
        for delta in [0.5, 0.6, 0.7, 0.8, 0.9] {
            for l in [2u32, 5] {
                points.push((eps, delta, l));
            }
        }
    }
    let failures: Vec<String> = points
        .par_iter()
        .flat_map_iter(|&(eps, delta, l)| {
            let mut bad = Vec::new();
            for c in [0.02, 0.1, 0.2, 0.3, 0.45] {
                for b in 1..=4u32 {
                    let e = env(1.0, c, eps, 1.0, delta);
                    let formula = incentives::min_service_threshold(&e, b, l);
                    let sweep = (1..=l).find(|&h| {
                        incentives::check_equilibrium(&ProtocolParams::uniform(l, h, b), &e)
                            .unwrap()
                            .is_equilibrium
                    });
                    if formula != sweep {
                        bad.push(format!("H_o eps={eps} delta={delta} L={l} c={c} b={b}: {formula:?} vs {sweep:?}"));
                    }
                }
            }
            let base = env(1.0, 0.1, eps, 1.0, delta);
            let t = incentives::existence_cost_threshold(&base, l);
            let top = ProtocolParams::uniform(l, l, 1);
            let below = incentives::check_equilibrium(&top, &NetworkEnv { c: t - 0.01, ..base }).unwrap();
            let above = incentives::check_equilibrium(&top, &NetworkEnv { c: t + 0.01, ..base }).unwrap();
            if t - 0.01 <= 0.0 || !below.is_equilibrium || above.is_equilibrium {
                bad.push(format!("T_c eps={eps} delta={delta} L={l}: T_c={t:.4}"));
            }
            bad
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} env points, {} disagreements{}",
            points.len(),
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

/// Discounted values of the compliant chain by value iteration.
fn compliant_values(params: &ProtocolParams, e: &NetworkEnv, v_one: &[f64]) -> Vec<f64> {
    let alpha = error_punish_prob(e, params.b);
    let l = params.l as usize;
    let mut v = vec![0.0; l + 1];
    loop {
        let next: Vec<f64> = (0..=l)
            .map(|t| {
                let up = v[(t + 1).min(l)];
                let f = params.forgiveness_prob(t as u32);
                let down = f * v[t] + (1.0 - f) * v[0];
                let p0 = if t >= params.h_o as usize { 1.0 - alpha } else { 1.0 };
                v_one[t] + e.delta * (p0 * up + (1.0 - p0) * down)
            })
            .collect();
        let change = linf(&next, &v);
        v = next;
        if change < 1e-14 * (1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
            return v;
        }
    }
}

/// Largest expected gain over every deterministic one-period deviation.
/// A server at `θ` faces `round(λb)` transactions; clients are drawn from the
/// reputations it must serve when active, and from all reputations otherwise.
fn best_deviation_gain(params: &ProtocolParams, e: &NetworkEnv) -> f64 {
    let dist = stationary::stationary(params, e).unwrap();
    let v_one = incentives::one_period_utilities(params, e, &dist).unwrap();
    let v = compliant_values(params, e, &v_one);
    let l = params.l as usize;
    let k = e.requests_per_period(params.b).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for theta in 0..=l {
        let active = theta >= params.h_o as usize;
        let serve = |client: usize| active && client as u32 >= params.client_threshold(theta as u32);
        let clients: Vec<usize> = (0..=l).filter(|&c| !active || serve(c)).collect();
        let mass: f64 = clients.iter().map(|&c| dist.eta[c]).sum();
        let weight = |c: usize| {
            if mass > 0.0 {
                dist.eta[c] / mass
            } else {
                1.0 / clients.len() as f64
            }
        };
        let f = params.forgiveness_prob(theta as u32);
        let up = v[(theta + 1).min(l)];
        let down = f * v[theta] + (1.0 - f) * v[0];
        // continuation and cost of a row `d` facing one composition
        let value = |d: u32, comp: &[usize]| {
            let mut p0 = 1.0;
            let mut cost = 0.0;
            for &client in comp {
                let serves = d >> client & 1 == 1;
                if serves {
                    cost += e.c;
                }
                p0 *= match (serve(client), serves) {
                    (true, true) => 1.0 - e.eps,
                    (true, false) => 0.0,
                    (false, true) => e.eps,
                    (false, false) => 1.0,
                };
            }
            -cost + e.delta * (p0 * up + (1.0 - p0) * down)
        };
        let compliant_row: u32 = (0..=l).filter(|&c| serve(c)).map(|c| 1u32 << c).sum();
        let mut comp = vec![0usize; k];
        let mut gains = vec![0.0; 1 << (l + 1)];
        let total = clients.len().pow(k as u32);
        for idx in 0..total {
            let mut rest = idx;
            let mut w = 1.0;
            for slot in comp.iter_mut() {
                *slot = clients[rest % clients.len()];
                rest /= clients.len();
                w *= weight(*slot);
            }
            if w == 0.0 {
                continue;
            }
            let base = value(compliant_row, &comp);
            for (d, g) in gains.iter_mut().enumerate() {
                *g += w * (value(d as u32, &comp) - base);
            }
        }
        best = best.max(gains.into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
    best
}

fn profiles(l: u32, h: u32) -> Vec<Vec<u32>> {
    let len = (l - h + 1) as usize;
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|m: Vec<u32>| {
                let lo = *m.last().unwrap_or(&h);
                (lo..=l).map(move |v| {
                    let mut n = m.clone();
                    n.push(v);
                    n
                })
            })
            .collect();
    }
    out
}

fn one_shot_deviation_soundness() -> Outcome {
    let mut cases = Vec::new();
    for l in 1..=4u32 {
        for h in 1..=l {
            for m_o in profiles(l, h) {
                for b in 1..=3u32 {
                    for beta in [0.0, 0.5] {
                        for eps in [0.0, 0.1, 0.3] {
                            for c in [0.05, 0.2, 0.5] {
                                for delta in [0.5, 0.9] {
                                    let p = ProtocolParams::uniform(l, h, b).with_thresholds(m_o.clone()).with_beta(beta);
                                    cases.push((p, env(1.0, c, eps, 1.0, delta)));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let results: Vec<(bool, bool)> = cases
        .par_iter()
        .map(|(p, e)| {
            let verdict = incentives::check_equilibrium(p, e).unwrap().is_equilibrium;
            let oracle = best_deviation_gain(p, e) <= SLACK_TOL;
            (verdict, oracle)
        })
        .collect();
    let disagreements = results.iter().filter(|(a, b)| a != b).count();
    let eq = results.iter().filter(|(a, _)| *a).count();
    outcome(
        disagreements == 0,
        format!(
            "{} configs ({} equilibria, {} not), {} disagreements",
            cases.len(),
            eq,
            cases.len() - eq,
            disagreements
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn monotonicity_suite() -> Outcome {
    let tol = 1e-10;
    let mut violations: Vec<String> = Vec::new();
    let mut checked = 0usize;
    let mut check = |ok: bool, what: String| {
        checked += 1;
        if !ok {
            violations.push(what);
        }
    };
    let slack = |p: &ProtocolParams, e: &NetworkEnv| incentives::check_equilibrium(p, e).unwrap().serve_slack;
    let utility = |p: &ProtocolParams, e: &NetworkEnv| incentives::overall_utilities(p, e).unwrap().social_utility;
    let betas: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();

    for l in 2..=4u32 {
        for h in 1..=l {
            for b in 1..=3u32 {
                for eps in [0.0, 0.05, 0.1, 0.3] {
                    for c in [0.05, 0.2] {
                        let e = env(1.0, c, eps, 1.0, 0.8);
                        // forgiveness
                        let us: Vec<f64> = betas.iter().map(|&x| utility(&ProtocolParams::uniform(l, h, b).with_beta(x), &e)).collect();
                        let ss: Vec<f64> = betas.iter().map(|&x| slack(&ProtocolParams::uniform(l, h, b).with_beta(x), &e)).collect();
                        for i in 1..betas.len() {
                            check(us[i] >= us[i - 1] - tol, format!("U in beta L={l} h={h} b={b} eps={eps}"));
                            check(ss[i] <= ss[i - 1] + tol, format!("slack in beta L={l} h={h} b={b} eps={eps} c={c}"));
                        }
                        // malicious fraction
                        let mut prev = f64::INFINITY;
                        for k in 0..=10 {
                            let s = slack(&ProtocolParams::uniform(l, h, b), &e.with_malicious(k as f64 * 0.05));
                            check(s <= prev + tol, format!("slack in p_D L={l} h={h} b={b} eps={eps}"));
                            prev = s;
                        }
                        // discount factor
                        let mut prev = f64::NEG_INFINITY;
                        for k in 1..=19 {
                            let s = slack(&ProtocolParams::uniform(l, h, b), &NetworkEnv { delta: k as f64 * 0.05, ..e });
                            check(s >= prev - tol, format!("slack in delta L={l} h={h} b={b} eps={eps}"));
                            prev = s;
                        }
                        // altruist bound
                        let pc = incentives::max_altruist_fraction(&ProtocolParams::uniform(l, h, b), &e).unwrap();
                        check(pc <= 0.5, format!("p_C bound L={l} h={h} b={b} eps={eps}"));
                    }
                }
            }
            for eps in [0.0, 0.05, 0.1, 0.3] {
                let e = env(1.0, 0.1, eps, 1.0, 0.8);
                // connections: per-transaction margin and utility
                let mut prev_margin = f64::INFINITY;
                let mut prev_u = f64::NEG_INFINITY;
                let u1 = utility(&ProtocolParams::uniform(l, h, 1), &e);
                for b in 1..=10u32 {
                    let p = ProtocolParams::uniform(l, h, b);
                    let m = incentives::check_equilibrium(&p, &e).unwrap().serve_margin;
                    check(m <= prev_margin + tol, format!("margin in b L={l} h={h} eps={eps}"));
                    prev_margin = m;
                    let u = utility(&p, &e);
                    if eps == 0.0 {
                        check((u - b as f64 * u1).abs() <= tol, format!("U linear in b L={l} h={h}"));
                    } else {
                        check(u >= prev_u - tol, format!("U in b L={l} h={h} eps={eps}"));
                    }
                    prev_u = u;
                }
            }
        }
        for b in 1..=3u32 {
            for eps in [0.0, 0.05, 0.1, 0.3] {
                let e = env(1.0, 0.2, eps, 1.0, 0.8);
                let mut prev_s = f64::NEG_INFINITY;
                let mut prev_u = f64::INFINITY;
                for h in 1..=l {
                    let p = ProtocolParams::uniform(l, h, b);
                    let s = slack(&p, &e);
                    let u = utility(&p, &e);
                    check(s >= prev_s - tol, format!("slack in h_o L={l} b={b} eps={eps}"));
                    check(u <= prev_u + tol, format!("U in h_o L={l} b={b} eps={eps}"));
                    prev_s = s;
                    prev_u = u;
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{checked} comparisons, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn designer_correctness() -> Outcome {
    let mut points = Vec::new();
    for l in 1..=4u32 {
        for b_cap in [1u32, 3, 8] {
            for c in [0.05, 0.15, 0.3] {
                for eps in [0.0, 0.05, 0.2] {
                    for delta in [0.6, 0.9] {
                        points.push((l, b_cap, env(1.0, c, eps, 1.0, delta)));
                    }
                }
            }
        }
    }
    let mismatches: Vec<String> = points
        .par_iter()
        .flat_map_iter(|&(l, b_cap, e)| {
            let mut bad = Vec::new();
            let mut utilities = Vec::new();
            for problem in [Problem::Osne, Problem::OsneVp, Problem::OsneVps] {
                let spec = DesignSpec::new(problem, l, b_cap, e).with_beta_grid(0.05);
                let fast = designer::solve(&spec).unwrap();
                let slow = designer::solve_exhaustive(&spec).unwrap();
                if fast.feasible != slow.feasible
                    || fast.params != slow.params
                    || (fast.utility - slow.utility).abs() > 1e-12
                {
                    bad.push(format!("{problem:?} L={l} b_cap={b_cap} env={e:?}"));
                }
                if let Some(p) = &fast.params {
                    if !incentives::check_equilibrium(p, &e).unwrap().is_equilibrium {
                        bad.push(format!("{problem:?} returned a non-equilibrium"));
                    }
                }
                utilities.push(if fast.feasible { fast.utility } else { f64::NEG_INFINITY });
            }
            if !(utilities[0] <= utilities[1] + 1e-12 && utilities[1] <= utilities[2] + 1e-12) {
                bad.push(format!("nesting L={l} b_cap={b_cap} env={e:?}: {utilities:?}"));
            }
            bad
        })
        .collect();
    outcome(
        mismatches.is_empty(),
        format!(
            "{} grid points x 3 problems, {} mismatches{}",
            points.len(),
            mismatches.len(),
            mismatches.first().map(|m| format!(", first: {m}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn non_decreasing(xs: &[u32]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}

fn figure_reproduction() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let osne = |e: NetworkEnv, b_cap: u32| designer::solve_osne(&DesignSpec::new(Problem::Osne, 3, b_cap, e)).unwrap();

    // (a) optimal service threshold against c/r and ε
    let h_c: Vec<u32> = (0..=19)
        .filter_map(|k| osne(env(1.0, k as f64 * 0.05, 0.1, 1.0, 0.8), 5).params.map(|p| p.h_o))
        .collect();
    let h_e: Vec<u32> = (0..=19)
        .filter_map(|k| osne(env(1.0, 0.2, k as f64 * 0.05, 1.0, 0.8), 5).params.map(|p| p.h_o))
        .collect();
    let a = non_decreasing(&h_c) && non_decreasing(&h_e) && h_c.first() < h_c.last();
    pass &= a;
    notes.push(format!("(a) {} h_o* vs c/r {:?}, vs eps {:?}", ok(a), h_c, h_e));

    // (b) optimal connection count against λ, overall and at each fixed h_o
    let lambdas: Vec<f64> = (1..=30).map(|k| k as f64 * 0.1).collect();
    let b_l: Vec<u32> = lambdas
        .iter()
        .filter_map(|&lam| osne(env(1.0, 0.2, 0.1, lam, 0.8), 10).params.map(|p| p.b))
        .collect();
    let per_h: Vec<bool> = (1..=3u32)
        .map(|h| {
            let bars: Vec<u32> = lambdas
                .iter()
                .filter_map(|&lam| {
                    incentives::max_connections(&env(1.0, 0.2, 0.1, lam, 0.8), &ProtocolParams::uniform(3, h, 1), 10)
                        .unwrap()
                })
                .collect();
            bars.windows(2).all(|w| w[0] >= w[1])
        })
        .collect();
    let b = b_l.windows(2).all(|w| w[0] >= w[1]) && b_l.first() > b_l.last();
    pass &= b;
    notes.push(format!(
        "(b) {} b* vs lambda {:?} (at fixed h_o = 1, 2, 3 non-increasing: {:?})",
        ok(b),
        dedup(&b_l),
        per_h
    ));

    // (c) social utility against the altruist fraction
    let spec = DesignSpec::new(Problem::OsneAh, 3, 5, env(1.0, 0.2, 0.1, 1.0, 0.8)).with_pc_grid(0.01);
    let curve = designer::altruist_utility_curve(&spec).unwrap();
    let dip = curve.windows(2).position(|w| w[0].2 && !w[1].2 && w[1].1 < w[0].1);
    let c_ok = match dip {
        Some(i) => {
            let rises_before = curve[..=i].windows(2).any(|w| w[1].1 > w[0].1);
            let rises_after = curve[i + 1..].windows(2).any(|w| w[1].1 > w[0].1);
            i > 0 && rises_before && rises_after
        }
        None => false,
    };
    pass &= c_ok;
    notes.push(format!(
        "(c) {} incentive collapse dip at p_C = {}",
        ok(c_ok),
        dip.map(|i| format!("{:.2}", curve[i + 1].0)).unwrap_or("none".into())
    ));

    // (d) simulated collapse points of TFT, a fixed norm and the optimized norm
    let (tft, fixed, optimized) = simulated_collapse_points();
    let d = match (tft, optimized) {
        (Some(t), Some(o)) => t < o,
        (Some(_), None) => true,
        _ => false,
    };
    pass &= d;
    notes.push(format!(
        "(d) {} collapse c/r: TFT {}, fixed h_o=3 norm {}, optimized norm {} (reference 0.25 / 0.45)",
        ok(d),
        fmt_point(tft),
        fmt_point(fixed),
        fmt_point(optimized)
    ));
    outcome(pass, notes.join("; "))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn dedup(xs: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::new();
    for &x in xs {
        if out.last() != Some(&x) {
            out.push(x);
        }
    }
    out
}

fn fmt_point(p: Option<f64>) -> String {
    p.map(|x| format!("{x:.2}")).unwrap_or_else(|| "none".into())
}

/// Smallest swept c/r at which reciprocative peers stop serving each other
/// (mutual delivery rate below 5% of its value at the cheapest cost), for
/// TFT, the fixed norm `(h_o, b, β, p_C) = (3, 5, 0, 0.3)` and the optimized norm.
fn simulated_collapse_points() -> (Option<f64>, Option<f64>, Option<f64>) {
    let costs: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let base = env(1.0, 0.0, 0.1, 1.0, 0.8).with_altruists(0.3);
    let run = |params: ProtocolParams, e: NetworkEnv, tft: bool| -> f64 {
        let mut cfg = SimConfig::new(200, 200, 77, params, e);
        cfg.behavior = Behavior::Rational;
        cfg.initial = InitialReputations::Zero;
        cfg.record_periods = false;
        cfg.window = 100;
        let trace = if tft { sim::run_tft(&cfg) } else { sim::run_sim(&cfg) }.unwrap();
        trace.summary.mutual_rate
    };
    let rates: Vec<(f64, f64, f64)> = costs
        .par_iter()
        .map(|&c| {
            let e = NetworkEnv { c, ..base };
            let fixed = ProtocolParams::uniform(3, 3, 5);
            let spec = DesignSpec::new(Problem::OsneVp, 3, 5, e).with_beta_grid(0.05);
            let best = designer::solve(&spec).unwrap().params.unwrap_or_else(|| fixed.clone());
            (run(fixed.clone(), e, true), run(fixed, e, false), run(best, e, false))
        })
        .collect();
    let collapse = |pick: fn(&(f64, f64, f64)) -> f64| {
        let reference = pick(&rates[0]);
        costs.iter().zip(&rates).find(|(_, r)| pick(r) < 0.05 * reference).map(|(c, _)| *c)
    };
    (collapse(|r| r.0), collapse(|r| r.1), collapse(|r| r.2))
}

// ---------------------------------------------------------------- criterion 8

fn excluded() -> Outcome {
    outcome(
        true,
        "EXCLUDED: decoded-video PSNR and the 200-peer / 100 Mbit wall-clock characteristics need an H.264 codec and the \
         source sequence; delivery-rate and utility orderings are checked under criterion 7(d) instead",
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, closed_form_vs_fixed_point),
        (2, monte_carlo_vs_analytic),
        (3, threshold_formulas_vs_sweeps),
        (4, one_shot_deviation_soundness),
        (5, monotonicity_suite),
        (6, designer_correctness),
        (7, figure_reproduction),
        (8, excluded),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let start = Instant::now();
        let out = run();
        let tag = if id == 8 {
            "SKIP"
        } else if out.pass {
            "PASS"
        } else {
            "FAIL"
        };
        println!("criterion {id}: {tag} [{:.1}s] {}", start.elapsed().as_secs_f64(), out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
