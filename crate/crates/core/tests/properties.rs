use normforge::designer::{self, DesignSpec, Problem};
use normforge::incentives;
use normforge::model::{NetworkEnv, ProtocolParams};
use normforge::stationary;
use proptest::prelude::*;

/// Environments with a positive net surplus per transaction.
fn arb_env() -> impl Strategy<Value = NetworkEnv> {
    (0.01..0.6f64, 0.0..0.3f64, 0.2..2.0f64, 0.05..0.99f64)
        .prop_map(|(c, eps, lambda, delta)| NetworkEnv::new(1.0, c, eps, lambda, delta))
}

fn arb_params() -> impl Strategy<Value = ProtocolParams> {
    (1u32..=6)
        .prop_flat_map(|l| (Just(l), 1..=l, 1u32..=5, 0.0..=1.0f64))
        .prop_map(|(l, h, b, beta)| ProtocolParams::uniform(l, h, b).with_beta(beta))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stationary_is_a_fixed_point(params in arb_params(), e in arb_env()) {
        let d = stationary::stationary_reciprocative(&params, &e).unwrap();
        prop_assert!(d.eta.iter().all(|&x| x >= -1e-12));
        prop_assert!((d.eta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let next = stationary::update_map(&params, d.alpha, &d.eta);
        prop_assert!(d.linf(&next) < 1e-7);
    }

    #[test]
    fn altruists_only_add_top_mass(params in arb_params(), e in arb_env(), p_c in 0.0..0.9f64) {
        let base = stationary::stationary_reciprocative(&params, &e).unwrap();
        let mixed = stationary::stationary(&params, &e.with_altruists(p_c)).unwrap();
        let top = params.l as usize;
        for (i, (&a, &b)) in base.eta.iter().zip(&mixed.eta).enumerate() {
            let want = (1.0 - p_c) * a + if i == top { p_c } else { 0.0 };
            prop_assert!((b - want).abs() < 1e-9);
        }
    }

    #[test]
    fn harsher_norm_pays_no_more(e in arb_env(), l in 1u32..=6, b in 1u32..=4) {
        // raising the service threshold at β = 0 never raises social utility
        let mut prev = f64::INFINITY;
        for h in 1..=l {
            let u = incentives::overall_utilities(&ProtocolParams::uniform(l, h, b), &e).unwrap().social_utility;
            prop_assert!(u <= prev + 1e-9);
            prev = u;
        }
    }

    #[test]
    fn margin_falls_with_cost(params in arb_params(), e in arb_env(), dc in 0.0..0.35f64) {
        let lo = incentives::check_equilibrium(&params, &e).unwrap();
        let hi = incentives::check_equilibrium(&params, &NetworkEnv { c: e.c + dc, ..e }).unwrap();
        prop_assert!(hi.serve_margin <= lo.serve_margin + 1e-9);
    }

    #[test]
    fn more_patience_never_breaks_equilibrium(params in arb_params(), e in arb_env(), dd in 0.0..0.5f64) {
        let patient = NetworkEnv { delta: (e.delta + dd).min(0.99), ..e };
        let before = incentives::check_equilibrium(&params, &e).unwrap();
        let after = incentives::check_equilibrium(&params, &patient).unwrap();
        prop_assert!(!before.is_equilibrium || after.is_equilibrium);
    }

    #[test]
    fn min_threshold_is_tight(e in arb_env(), l in 1u32..=8, b in 1u32..=4) {
        let h = incentives::min_service_threshold(&e, b, l);
        let ok = |h: u32| incentives::check_equilibrium(&ProtocolParams::uniform(l, h, b), &e).unwrap().is_equilibrium;
        match h {
            Some(h) => {
                prop_assert!(ok(h));
                prop_assert!(h == 1 || !ok(h - 1));
            }
            None => prop_assert!((1..=l).all(|h| !ok(h))),
        }
    }

    #[test]
    fn max_connections_is_tight(e in arb_env(), l in 1u32..=5, h_seed in 1u32..=5, cap in 1u32..=8) {
        let h = h_seed.min(l);
        let base = ProtocolParams::uniform(l, h, 1);
        let ok = |b: u32| incentives::check_equilibrium(&base.clone().with_b(b), &e).unwrap().is_equilibrium;
        match incentives::max_connections(&e, &base, cap).unwrap() {
            Some(b) => {
                prop_assert!(b <= cap && (1..=b).all(ok));
                prop_assert!(b == cap || !ok(b + 1));
            }
            None => prop_assert!(!ok(1)),
        }
    }

    #[test]
    fn forgiveness_bound_separates(e in arb_env(), l in 1u32..=5, h_seed in 1u32..=5, b in 1u32..=3) {
        let p = ProtocolParams::uniform(l, h_seed.min(l), b);
        let ok = |beta: f64| incentives::check_equilibrium(&p.clone().with_beta(beta), &e).unwrap().is_equilibrium;
        if let Some(beta) = incentives::max_forgiveness(&p, &e).unwrap() {
            prop_assert!(ok((beta - 1e-6).max(0.0)));
            if beta < 1.0 - 1e-6 {
                prop_assert!(!ok(beta + 1e-6));
            }
        } else {
            prop_assert!(!ok(0.0));
        }
    }

    #[test]
    fn designed_norm_is_an_equilibrium(e in arb_env(), l in 1u32..=4, cap in 1u32..=4) {
        for problem in [Problem::Osne, Problem::OsneVp] {
            let spec = DesignSpec::new(problem, l, cap, e).with_beta_grid(0.1);
            let res = designer::solve(&spec).unwrap();
            if let Some(p) = &res.params {
                prop_assert!(res.feasible);
                let rep = incentives::check_equilibrium(p, &e).unwrap();
                prop_assert!(rep.is_equilibrium);
                let u = incentives::overall_utilities(p, &e).unwrap().social_utility;
                prop_assert!((u - res.utility).abs() <= 1e-9 * u.abs().max(1.0));
            } else {
                prop_assert!(!res.feasible);
            }
        }
    }

    #[test]
    fn forgiving_design_never_worse(e in arb_env(), l in 1u32..=4, cap in 1u32..=4) {
        let plain = designer::solve(&DesignSpec::new(Problem::Osne, l, cap, e)).unwrap();
        let vp = designer::solve(&DesignSpec::new(Problem::OsneVp, l, cap, e).with_beta_grid(0.1)).unwrap();
        if plain.feasible {
            prop_assert!(vp.feasible);
            prop_assert!(vp.utility >= plain.utility - 1e-9 * plain.utility.abs().max(1.0));
        }
    }
}
