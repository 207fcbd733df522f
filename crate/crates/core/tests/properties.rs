use gflab::association::{basis, fit_values, verify_claim, Claim, EpsilonGrid};
use gflab::functionals::default_test_functions;
use gflab::identities::binom_poly;
use gflab::mollifier::build_mollifier;
use gflab::poly::{rat_int, rat_to_f64};
use gflab::special::binomial_real;
use proptest::prelude::*;
use std::sync::Arc;

fn families(seeds: &[u64]) -> Vec<Arc<gflab::mollifier::Mollifier>> {
    seeds.iter().map(|&s| Arc::new(build_mollifier(2, 10, 1.0, s).unwrap())).collect()
}

#[test]
fn c0_is_mollifier_independent_while_divergences_are_not() {
    // different seeds and supports
    let ms: Vec<_> = [(11, 1.0), (12, 0.7), (13, 1.4)]
        .iter()
        .map(|&(seed, l)| Arc::new(build_mollifier(2, 10, l, seed).unwrap()))
        .collect();
    let psis = default_test_functions();
    let tol = 1e-3;
    for claim in [Claim::Mik { p: 1, q: 1 }, Claim::Thm2 { a: 0.3 }, Claim::Thm3 { a: -0.3 }, Claim::Thm4 { a: 0.5, p: 2 }] {
        let r = verify_claim(&claim, &ms, &psis, &EpsilonGrid::default(), tol).unwrap();
        for s in &r.spread_checks {
            assert!(s.max_rel_dev <= 10.0 * tol, "{} {}: {}", r.claim_id, s.psi, s.max_rel_dev);
        }
        // divergent coefficients of the individual terms depend on the family
        let generic: Vec<_> = r.fits.iter().filter(|f| f.psi == "generic").collect();
        let lead = |f: &&gflab::association::FitRecord| {
            let c = &f.term_coeffs[1];
            c.iter().zip(&f.exponents).filter(|(_, e)| **e < 0).map(|(c, _)| c.abs()).fold(0.0, f64::max)
        };
        let (lo, hi) = generic.iter().map(lead).fold((f64::MAX, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        assert!((hi - lo) / hi > 1e-3, "{}: divergences nearly equal across families", r.claim_id);
    }
}

#[test]
fn c0_is_stable_under_basis_and_grid_changes() {
    let ms = families(&[1, 2]);
    let psis = default_test_functions();
    let tol = 1e-3;
    for claim in [Claim::Thm2 { a: -0.5 }, Claim::Cor3 { a: 0.7 }, Claim::Mik { p: 1, q: 2 }] {
        let base = verify_claim(&claim, &ms, &psis, &EpsilonGrid::default(), tol).unwrap();
        let half = EpsilonGrid { eps0: 0.05, ..EpsilonGrid::default() };
        let halved = verify_claim(&claim, &ms, &psis, &half, tol).unwrap();
        for ((a, b), fit) in base.c0_checks.iter().zip(&halved.c0_checks).zip(&base.fits) {
            let scale = a.expected.abs().max(1e-3 * a.got.abs().max(1.0));
            assert!((a.got - b.got).abs() / scale < tol, "{} {}: grid {} vs {}", base.claim_id, a.psi, a.got, b.got);
            assert!((fit.c0_extended_basis - a.got).abs() / scale < tol, "{} {}: basis", base.claim_id, a.psi);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_polynomial_models(c in prop::collection::vec(-5.0f64..5.0, 4)) {
        let eps = EpsilonGrid::default().points();
        let exps = basis(-1, 2);
        let vals: Vec<f64> = eps.iter().map(|e| c.iter().zip(&exps).map(|(c, &j)| c * e.powi(j)).sum()).collect();
        let f = fit_values(&eps, &vals, &exps, 0.0).unwrap();
        for (got, want) in f.coefficients.iter().zip(&c) {
            prop_assert!((got - want).abs() < 1e-8 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn binomial_polynomials_match_real_binomials(c in -6i64..6, n in 0u32..10, a in -5.0f64..5.0) {
        let p = binom_poly(&rat_int(c), n);
        let v: f64 = p.to_f64_coeffs().iter().rev().fold(0.0, |acc, k| acc * a + k);
        let w = binomial_real(a + c as f64, i64::from(n));
        prop_assert!((v - w).abs() <= 1e-10 * w.abs().max(1.0));
    }

    #[test]
    fn mollifier_moments_are_exact(q in 0u32..6, seed in 0u64..1000) {
        let m = build_mollifier(q, q + 3, 1.0, seed).unwrap();
        prop_assert_eq!(rat_to_f64(&m.moment(0)), 1.0);
        for j in 1..=q {
            prop_assert!(num_traits::Zero::is_zero(&m.moment(j)));
        }
    }
}
