//! Exact checks of the binomial identities behind the balanced-product
//! proofs. Binomials C(a+c, n) are polynomials in a, so equality is decided
//! by exact rational arithmetic.

use crate::poly::{rat, rat_int, Rational, RationalPoly};
use crate::special::binomial_real;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeSet;

/// a ↦ C(a + c, n) = (a+c)(a+c−1)⋯(a+c−n+1)/n!.
pub fn binom_poly(c: &Rational, n: u32) -> RationalPoly {
    signed_binom_poly(&Rational::one(), c, n)
}

/// a ↦ C(s·a + c, n).
pub fn signed_binom_poly(s: &Rational, c: &Rational, n: u32) -> RationalPoly {
    let mut p = RationalPoly::one();
    for i in 0..n {
        let factor = RationalPoly::linear(s.clone(), c - rat_int(i64::from(i)));
        p = &p * &factor;
    }
    p.scale(&(Rational::one() / factorial(n)))
}

/// C(x, n) at a rational point.
pub fn binom_at(x: &Rational, n: u32) -> Rational {
    let mut acc = Rational::one();
    for i in 0..n {
        acc *= x - rat_int(i64::from(i));
    }
    acc / factorial(n)
}

/// C(k, n) for integer k (any sign) as a rational constant.
fn binom_int(k: i64, n: u32) -> Rational {
    binom_at(&rat_int(k), n)
}

fn factorial(n: u32) -> Rational {
    (1..=n).fold(Rational::one(), |acc, k| acc * rat_int(i64::from(k)))
}

fn sign(n: u32) -> Rational {
    if n.is_multiple_of(2) {
        Rational::one()
    } else {
        -Rational::one()
    }
}

/// (−1)^p C(−a−1, p) = C(a+p, p).
pub fn reflection_holds(p: u32) -> bool {
    let lhs = signed_binom_poly(&-Rational::one(), &-Rational::one(), p).scale(&sign(p));
    lhs == binom_poly(&rat_int(i64::from(p)), p)
}

pub fn verify_reflection(p_max: u32) -> bool {
    (0..=p_max).into_par_iter().all(reflection_holds)
}

/// C(x+y, n) = Σ_k C(x,k)C(y,n−k) at (n+1)² points of a seeded rational grid.
pub fn addition_holds(n: u32, seed: u64) -> bool {
    let (xs, ys) = sample_grid(n as usize + 1, seed ^ u64::from(n));
    xs.iter().all(|x| {
        ys.iter().all(|y| {
            let rhs = (0..=n).fold(Rational::zero(), |acc, k| acc + binom_at(x, k) * binom_at(y, n - k));
            binom_at(&(x + y), n) == rhs
        })
    })
}

/// Two sets of `count` distinct rationals with small numerators and denominators.
fn sample_grid(count: usize, seed: u64) -> (Vec<Rational>, Vec<Rational>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let mut set = BTreeSet::new();
        while set.len() < count {
            set.insert(rat(rng.gen_range(-97..=97), rng.gen_range(1..=13)));
        }
        set.into_iter().collect::<Vec<_>>()
    };
    let xs = draw();
    let ys = draw();
    (xs, ys)
}

pub fn verify_addition(n_max: u32, seed: u64) -> bool {
    (1..=n_max).into_par_iter().all(|n| addition_holds(n, seed))
}

/// Σ_t [C(m−h, k−t) + C(m−h+1, k−t)]·B_t(a) for the given binomial family B_t.
fn reduced_sum(h: u32, m: u32, k: u32, family: impl Fn(u32) -> RationalPoly) -> RationalPoly {
    let (h, m) = (i64::from(h), i64::from(m));
    (0..=k).fold(RationalPoly::zero(), |acc, t| {
        let w = binom_int(m - h, k - t) + binom_int(m - h + 1, k - t);
        &acc + &family(t).scale(&w)
    })
}

fn minus_a_minus_one(t: u32) -> RationalPoly {
    signed_binom_poly(&-Rational::one(), &-Rational::one(), t)
}

fn shifted(c: i64, n: u32) -> RationalPoly {
    binom_poly(&rat_int(c), n)
}

/// Even order p = 2h, inner sum against C(−a−1, t):
/// Σ_{t≤2m+1}[…]C(−a−1,t) = −[C(a+h+m+1, 2m+1) + C(a+h+m, 2m+1)].
pub fn s_reduction_even_first(h: u32, m: u32) -> bool {
    let k = 2 * m + 1;
    let (h_, m_) = (i64::from(h), i64::from(m));
    let lhs = reduced_sum(h, m, k, minus_a_minus_one);
    let rhs = -&(&shifted(h_ + m_ + 1, k) + &shifted(h_ + m_, k));
    lhs == rhs
}

/// Even order p = 2h, inner sum against C(a+2h, t):
/// Σ_{t≤2m+1}[…]C(a+2h,t) = C(a+h+m, 2m+1) + C(a+h+m+1, 2m+1).
pub fn s_reduction_even_second(h: u32, m: u32) -> bool {
    let k = 2 * m + 1;
    let (h_, m_) = (i64::from(h), i64::from(m));
    let lhs = reduced_sum(h, m, k, |t| shifted(2 * h_, t));
    let rhs = &shifted(h_ + m_, k) + &shifted(h_ + m_ + 1, k);
    lhs == rhs
}

/// Odd order p = 2h+1, inner sum against C(−a−1, t):
/// Σ_{t≤2m}[…]C(−a−1,t) = C(a+h+m, 2m) + C(a+h+m−1, 2m).
pub fn s_reduction_odd(h: u32, m: u32) -> bool {
    let k = 2 * m;
    let (h_, m_) = (i64::from(h), i64::from(m));
    let lhs = reduced_sum(h, m, k, minus_a_minus_one);
    let rhs = &shifted(h_ + m_, k) + &shifted(h_ + m_ - 1, k);
    lhs == rhs
}

/// The odd-order right-hand side in the form C(a+h+m+1, 2m) + C(a+h+m, 2m+1);
/// kept to document that this form does not hold.
pub fn s_reduction_odd_alternative(h: u32, m: u32) -> bool {
    let k = 2 * m;
    let (h_, m_) = (i64::from(h), i64::from(m));
    let lhs = reduced_sum(h, m, k, minus_a_minus_one);
    let rhs = &shifted(h_ + m_ + 1, k) + &shifted(h_ + m_, k + 1);
    lhs == rhs
}

pub fn verify_s_reduction(h_max: u32) -> bool {
    s_reduction_instances(h_max).into_par_iter().all(|(h, m)| {
        s_reduction_even_first(h, m) && s_reduction_even_second(h, m) && s_reduction_odd(h, m)
    })
}

fn s_reduction_instances(h_max: u32) -> Vec<(u32, u32)> {
    (1..=h_max).flat_map(|h| (0..h).map(move |m| (h, m))).collect()
}

/// ½[(−1)^p C(−a−1, p) + C(a+p, p)] = C(a+p, p): the two boundary terms
/// together give C(a+p, p)⟨δ^{(p)}, ψ⟩.
pub fn r_sum_holds(p: u32) -> bool {
    let r1 = signed_binom_poly(&-Rational::one(), &-Rational::one(), p).scale(&sign(p));
    let r2 = binom_poly(&rat_int(i64::from(p)), p);
    (&r1 + &r2).scale(&rat(1, 2)) == r2
}

pub fn verify_r_sum(p_max: u32) -> bool {
    (0..=p_max).into_par_iter().all(r_sum_holds)
}

/// Largest relative gap between binom_poly(c, n)(a) and binomial_real(a+c, n)
/// over `samples` seeded a ∈ (−6, 6), for c ∈ {−n−1..n+1}, n ≤ n_max.
pub fn float_cross_check(n_max: u32, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..samples).map(|_| rng.gen_range(-6.0..6.0)).collect();
    let mut worst = 0.0f64;
    for n in 0..=n_max {
        let bound = i64::from(n) + 1;
        for c in -bound..=bound {
            let coeffs = binom_poly(&rat_int(c), n).to_f64_coeffs();
            for &a in &points {
                let horner = coeffs.iter().rev().fold(0.0, |acc, k| acc * a + k);
                let direct = binomial_real(a + c as f64, i64::from(n));
                let scale = direct.abs().max(1.0);
                worst = worst.max((horner - direct).abs() / scale);
            }
        }
    }
    worst
}

/// One line of the identity certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub identity_id: String,
    pub parameters: serde_json::Value,
    pub status: String,
}

fn cert(id: &str, parameters: serde_json::Value, ok: bool) -> Certificate {
    Certificate { identity_id: id.into(), parameters, status: if ok { "exact" } else { "fail" }.into() }
}

/// Bounds for the identity suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityBounds {
    pub p_max: u32,
    pub n_max: u32,
    pub h_max: u32,
    pub seed: u64,
}

impl Default for IdentityBounds {
    fn default() -> Self {
        Self { p_max: 12, n_max: 12, h_max: 6, seed: 2024 }
    }
}

/// All identity instances in a fixed order.
pub fn certificates(bounds: &IdentityBounds) -> Vec<Certificate> {
    let mut jobs: Vec<Box<dyn Fn() -> Certificate + Send + Sync>> = Vec::new();
    for p in 0..=bounds.p_max {
        jobs.push(Box::new(move || cert("reflection", json!({ "p": p }), reflection_holds(p))));
    }
    for n in 1..=bounds.n_max {
        let seed = bounds.seed;
        jobs.push(Box::new(move || {
            cert("addition", json!({ "n": n, "points": (n + 1) * (n + 1), "seed": seed }), addition_holds(n, seed))
        }));
    }
    for p in 0..=bounds.p_max {
        jobs.push(Box::new(move || cert("r_sum", json!({ "p": p }), r_sum_holds(p))));
    }
    for (h, m) in s_reduction_instances(bounds.h_max) {
        jobs.push(Box::new(move || cert("s_reduction_even_first", json!({ "h": h, "m": m }), s_reduction_even_first(h, m))));
        jobs.push(Box::new(move || {
            cert("s_reduction_even_second", json!({ "h": h, "m": m }), s_reduction_even_second(h, m))
        }));
        jobs.push(Box::new(move || cert("s_reduction_odd", json!({ "h": h, "m": m }), s_reduction_odd(h, m))));
    }
    jobs.par_iter().map(|job| job()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_poly_examples() {
        assert_eq!(binom_poly(&rat_int(0), 0), RationalPoly::one());
        assert_eq!(binom_poly(&rat_int(0), 1), RationalPoly::x());
        assert_eq!(binom_poly(&rat_int(2), 2), RationalPoly::new(vec![rat_int(1), rat(3, 2), rat(1, 2)]));
        assert_eq!(binom_poly(&rat_int(5), 7).degree(), Some(7));
    }

    #[test]
    fn reflection_examples() {
        assert!(reflection_holds(0));
        // C(−1.5, 2) = 1.875 = C(2.5, 2)
        let half = rat(1, 2);
        let lhs = signed_binom_poly(&-Rational::one(), &-Rational::one(), 2).eval(&half);
        assert_eq!(lhs, rat(15, 8));
        assert_eq!(binom_poly(&rat_int(2), 2).eval(&half), rat(15, 8));
        assert!(verify_reflection(12));
    }

    #[test]
    fn addition_examples() {
        // x = y = 1, n = 2: C(2,2) = 1 = 0 + 1 + 0
        let one = Rational::one();
        let terms: Vec<Rational> = (0..=2).map(|k| binom_at(&one, k) * binom_at(&one, 2 - k)).collect();
        assert_eq!(terms, vec![Rational::zero(), one.clone(), Rational::zero()]);
        assert!(addition_holds(1, 7));
        assert!(verify_addition(12, 2024));
    }

    #[test]
    fn sample_grid_points_are_distinct() {
        let (xs, ys) = sample_grid(13, 5);
        assert_eq!(xs.len(), 13);
        assert_eq!(ys.iter().collect::<BTreeSet<_>>().len(), 13);
    }

    #[test]
    fn s_reduction_small_cases() {
        assert!(s_reduction_even_first(1, 0));
        assert!(s_reduction_even_second(1, 0));
        assert!(s_reduction_odd(1, 0));
        assert!(verify_s_reduction(6));
    }

    #[test]
    fn odd_alternative_form_fails() {
        assert!((1..=4).flat_map(|h| (0..h).map(move |m| (h, m))).any(|(h, m)| !s_reduction_odd_alternative(h, m)));
        assert!(!s_reduction_odd_alternative(1, 0));
    }

    #[test]
    fn r_sum() {
        assert!(verify_r_sum(12));
    }

    #[test]
    fn a_wrong_identity_is_rejected() {
        // C(a+1, 2) ≠ C(a, 2)
        assert_ne!(binom_poly(&rat_int(1), 2), binom_poly(&rat_int(0), 2));
        // addition with a shifted upper index must fail somewhere
        let x = rat(3, 7);
        let y = rat(-5, 3);
        let wrong = (0..=3).fold(Rational::zero(), |acc, k| acc + binom_at(&x, k) * binom_at(&y, 3 - k + 1));
        assert_ne!(binom_at(&(&x + &y), 3), wrong);
    }

    #[test]
    fn float_agreement() {
        assert!(float_cross_check(12, 20, 11) < 1e-10);
    }

    #[test]
    fn certificate_order_is_stable() {
        let b = IdentityBounds { p_max: 4, n_max: 4, h_max: 3, seed: 1 };
        let c1 = certificates(&b);
        let c2 = certificates(&b);
        assert_eq!(c1, c2);
        assert!(c1.iter().all(|c| c.status == "exact"));
        assert_eq!(c1[0].identity_id, "reflection");
        assert_eq!(c1.len(), 5 + 4 + 5 + 3 * 6);
    }
}
