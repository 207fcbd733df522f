//! Compactly supported parameter functions with prescribed moments.
//!
//! φ(u) = (1 − (u/l)²)^s · P(u) on [−l, l] and zero outside. P has degree
//! q + d; the top d coefficients are drawn from a seeded generator and the
//! remaining q + 1 are fixed by the moment conditions ∫u^j φ = δ_{0j},
//! j = 0..q, solved exactly over the rationals.

use crate::error::{Error, Result};
use crate::poly::{rat, rat_from_f64, rat_int, rat_parse, rat_to_f64, rat_to_string, ChebPoly, Rational, RationalPoly};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default number of seeded free coefficients.
pub const DEFAULT_EXTRA: u32 = 2;

/// Construction parameters of a mollifier family member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MollifierSpec {
    /// highest vanishing moment
    pub q: u32,
    /// power of the bump factor; φ is (s−1)-times continuously differentiable
    pub s: u32,
    pub l: Rational,
    pub seed: u64,
    /// number of seeded free coefficients
    pub extra: u32,
}

impl MollifierSpec {
    pub fn new(q: u32, s: u32, l: f64, seed: u64) -> Result<Self> {
        let l = rat_from_f64(l)
            .filter(|l| l.is_positive())
            .ok_or_else(|| Error::config(format!("support radius must be positive and finite, got {l}")))?;
        Ok(Self { q, s, l, seed, extra: DEFAULT_EXTRA })
    }

    pub fn with_extra(mut self, extra: u32) -> Self {
        self.extra = extra;
        self
    }
}

#[derive(Clone)]
pub struct Mollifier {
    spec: MollifierSpec,
    l_f64: f64,
    /// exact φ^{(r)}, index r + 1 (index 0 holds the antiderivative from −l)
    exact: Vec<RationalPoly>,
    cheb: Vec<ChebPoly>,
}

impl std::fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mollifier")
            .field("q", &self.spec.q)
            .field("s", &self.spec.s)
            .field("l", &rat_to_string(&self.spec.l))
            .field("seed", &self.spec.seed)
            .field("extra", &self.spec.extra)
            .finish()
    }
}

impl PartialEq for Mollifier {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.exact[1] == other.exact[1]
    }
}

/// Exact ∫_{−l}^{l} u^n (1 − u²/l²)^s du.
fn bump_moment(n: u32, s: u32, l: &Rational) -> Rational {
    if n % 2 == 1 {
        return Rational::zero();
    }
    // 2 l^{n+1} ∫_0^1 t^n (1−t²)^s dt = l^{n+1} B((n+1)/2, s+1)
    // computed through the expansion Σ_k C(s,k)(−1)^k/(n+2k+1)
    let mut acc = Rational::zero();
    let mut binom = Rational::one();
    for k in 0..=s {
        let term = &binom / rat_int(i64::from(n + 2 * k + 1));
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom = binom * rat_int(i64::from(s - k)) / rat_int(i64::from(k + 1));
    }
    let mut lp = Rational::one();
    for _ in 0..=n {
        lp *= l;
    }
    acc * rat_int(2) * lp
}

/// Solves the square system `m x = b` exactly by Gaussian elimination.
fn solve_exact(mut m: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if m[row][col].is_zero() {
                continue;
            }
            let f = &m[row][col] / &m[col][col];
            for k in col..n {
                let delta = &f * &m[col][k];
                m[row][k] -= delta;
            }
            let delta = &f * &b[col];
            b[row] -= delta;
        }
    }
    let mut x = vec![Rational::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc -= &m[row][k] * &x[k];
        }
        x[row] = acc / &m[row][row];
    }
    Some(x)
}

impl Mollifier {
    pub fn build(spec: &MollifierSpec) -> Result<Self> {
        if spec.s < 2 {
            return Err(Error::config(format!("smoothness s must be at least 2, got {}", spec.s)));
        }
        if !spec.l.is_positive() {
            return Err(Error::config("support radius must be positive"));
        }
        let q = spec.q as usize;
        let d = spec.extra as usize;
        let l = &spec.l;

        // free coefficients c_{q+1..q+d} ~ n/64 · l^{−k}, n ∈ ±[1, 48]
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut coeffs = vec![Rational::zero(); q + d + 1];
        for (k, c) in coeffs.iter_mut().enumerate().skip(q + 1) {
            let mag: i64 = rng.gen_range(1..=48);
            let n = if rng.gen_bool(0.5) { mag } else { -mag };
            let mut v = rat(n, 64);
            for _ in 0..k {
                v /= l;
            }
            *c = v;
        }

        let moments: Vec<Rational> = (0..=(2 * q + d) as u32).map(|n| bump_moment(n, spec.s, l)).collect();
        let matrix: Vec<Vec<Rational>> =
            (0..=q).map(|j| (0..=q).map(|k| moments[j + k].clone()).collect()).collect();
        let rhs: Vec<Rational> = (0..=q)
            .map(|j| {
                let mut v = if j == 0 { Rational::one() } else { Rational::zero() };
                for (k, c) in coeffs.iter().enumerate().skip(q + 1) {
                    v -= c * &moments[j + k];
                }
                v
            })
            .collect();
        let solved = solve_exact(matrix, rhs)
            .ok_or_else(|| Error::config("moment system is singular"))?;
        coeffs[..=q].clone_from_slice(&solved);

        let bump = RationalPoly::new(vec![Rational::one(), Rational::zero(), -(Rational::one() / (l * l))])
            .pow(spec.s);
        let phi = &bump * &RationalPoly::new(coeffs);
        Ok(Self::from_poly(spec.clone(), phi))
    }

    fn from_poly(spec: MollifierSpec, phi: RationalPoly) -> Self {
        let l = spec.l.clone();
        let anti = phi.antiderivative();
        let anti = &anti - &RationalPoly::constant(anti.eval(&-l.clone()));
        let mut exact = vec![anti, phi];
        for r in 1..spec.s as usize {
            let next = exact[r].derivative();
            exact.push(next);
        }
        let cheb = exact.iter().map(|p| ChebPoly::from_poly(p, &l)).collect();
        Self { l_f64: rat_to_f64(&l), spec, exact, cheb }
    }

    pub fn spec(&self) -> &MollifierSpec {
        &self.spec
    }

    pub fn l(&self) -> f64 {
        self.l_f64
    }

    pub fn l_exact(&self) -> &Rational {
        &self.spec.l
    }

    pub fn s(&self) -> u32 {
        self.spec.s
    }

    pub fn q(&self) -> u32 {
        self.spec.q
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    /// Degree of the polynomial piece of φ.
    pub fn degree(&self) -> usize {
        self.exact[1].degree().unwrap_or(0)
    }

    /// Highest derivative order that may be requested.
    pub fn max_order(&self) -> i32 {
        self.spec.s as i32 - 1
    }

    pub fn check_order(&self, r: i32) -> Result<()> {
        if r < -1 || r > self.max_order() {
            return Err(Error::config(format!(
                "derivative order {r} outside [-1, {}] for smoothness s = {}",
                self.max_order(),
                self.spec.s
            )));
        }
        Ok(())
    }

    /// Exact polynomial piece of φ^{(r)}; r = −1 is the antiderivative
    /// vanishing at −l.
    pub fn exact_derivative(&self, r: i32) -> Result<&RationalPoly> {
        self.check_order(r)?;
        Ok(&self.exact[(r + 1) as usize])
    }

    /// φ itself as an exact polynomial on [−l, l].
    pub fn poly(&self) -> &RationalPoly {
        &self.exact[1]
    }

    /// φ^{(r)}(u) with the support clamping: zero for |u| ≥ l when r ≥ 0; for
    /// the antiderivative zero below −l and one above l.
    pub fn eval_derivative(&self, r: i32, u: f64) -> Result<f64> {
        self.check_order(r)?;
        let l = self.l_f64;
        if u <= -l {
            return Ok(0.0);
        }
        if u >= l {
            return Ok(if r == -1 { 1.0 } else { 0.0 });
        }
        Ok(self.cheb[(r + 1) as usize].eval(u))
    }

    /// Polynomial piece of φ^{(r)} evaluated without clamping. The caller
    /// guarantees −1 ≤ r ≤ s−1.
    pub fn extended(&self, r: i32, u: f64) -> f64 {
        debug_assert!(r >= -1 && r <= self.max_order());
        self.cheb[(r + 1) as usize].eval(u)
    }

    /// r-th derivative of φ_ε(x) = ε^{−1} φ(x/ε).
    pub fn eval_scaled(&self, r: i32, eps: f64, x: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::config(format!("eps must be positive, got {eps}")));
        }
        let v = self.eval_derivative(r, x / eps)?;
        Ok(v * eps.powi(-1 - r))
    }

    /// Exact ∫ u^j φ(u) du.
    pub fn moment(&self, j: u32) -> Rational {
        let l = &self.spec.l;
        self.exact[1]
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| c * bump_free_moment(k as u32 + j, l))
            .fold(Rational::zero(), |acc, t| acc + t)
    }

    /// Exact ∫ φ².
    pub fn l2_norm_sq(&self) -> Rational {
        let l = &self.spec.l;
        (&self.exact[1] * &self.exact[1]).integrate(&-l.clone(), l)
    }

    /// Exact ∫ u φ(u)².
    pub fn first_moment_sq(&self) -> Rational {
        let l = &self.spec.l;
        (&(&self.exact[1] * &self.exact[1]) * &RationalPoly::x()).integrate(&-l.clone(), l)
    }

    /// Exact ∫ φ(u) Φ(u) du with Φ the antiderivative; equals 1/2.
    pub fn half_mass(&self) -> Rational {
        let l = &self.spec.l;
        (&self.exact[1] * &self.exact[0]).integrate(&-l.clone(), l)
    }

    pub fn to_record(&self) -> MollifierRecord {
        MollifierRecord {
            l: rat_to_string(&self.spec.l),
            s: self.spec.s,
            q: self.spec.q,
            d: self.spec.extra,
            seed: self.spec.seed,
            coeffs: self.exact[1].coeffs().iter().map(rat_to_string).collect(),
        }
    }

    /// Rebuilds a mollifier from its record; the stored coefficients are
    /// checked against the moment conditions.
    pub fn from_record(rec: &MollifierRecord) -> Result<Self> {
        let l = rat_parse(&rec.l)
            .filter(|l| l.is_positive())
            .ok_or_else(|| Error::config(format!("bad support radius {:?}", rec.l)))?;
        if rec.s < 2 {
            return Err(Error::config(format!("smoothness s must be at least 2, got {}", rec.s)));
        }
        let coeffs = rec
            .coeffs
            .iter()
            .map(|c| rat_parse(c).ok_or_else(|| Error::config(format!("bad rational {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let spec = MollifierSpec { q: rec.q, s: rec.s, l, seed: rec.seed, extra: rec.d };
        let m = Self::from_poly(spec, RationalPoly::new(coeffs));
        // the bump factor must divide the stored polynomial
        let l = m.spec.l.clone();
        for r in 0..m.spec.s as i32 {
            let p = &m.exact[(r + 1) as usize];
            if !p.eval(&l).is_zero() || !p.eval(&-l.clone()).is_zero() {
                return Err(Error::config("coefficients do not vanish to order s at ±l"));
            }
        }
        for j in 0..=m.spec.q {
            let want = if j == 0 { Rational::one() } else { Rational::zero() };
            if m.moment(j) != want {
                return Err(Error::config(format!("moment {j} violates the moment conditions")));
            }
        }
        Ok(m)
    }
}

/// Exact ∫_{−l}^{l} u^n du.
fn bump_free_moment(n: u32, l: &Rational) -> Rational {
    if n % 2 == 1 {
        return Rational::zero();
    }
    let mut lp = Rational::one();
    for _ in 0..=n {
        lp *= l;
    }
    lp * rat_int(2) / rat_int(i64::from(n + 1))
}

/// JSON form; rationals are written as "p/q" strings so the record
/// round-trips exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MollifierRecord {
    pub l: String,
    pub s: u32,
    pub q: u32,
    pub d: u32,
    pub seed: u64,
    pub coeffs: Vec<String>,
}

/// Convenience constructor with the default number of free coefficients.
pub fn build_mollifier(q: u32, s: u32, l: f64, seed: u64) -> Result<Mollifier> {
    Mollifier::build(&MollifierSpec::new(q, s, l, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(q: u32, s: u32, l: f64) -> Mollifier {
        Mollifier::build(&MollifierSpec::new(q, s, l, 0).unwrap().with_extra(0)).unwrap()
    }

    #[test]
    fn plain_quadratic_bump() {
        let m = plain(0, 2, 1.0);
        let want = RationalPoly::new(vec![rat(15, 16), rat(0, 1), rat(-30, 16), rat(0, 1), rat(15, 16)]);
        assert_eq!(m.poly(), &want);
        assert_eq!(m.l2_norm_sq(), rat(5, 7));
        assert_eq!(m.moment(2), rat(1, 7));
        assert_eq!(m.moment(0), rat(1, 1));
    }

    #[test]
    fn moments_are_exact() {
        for seed in 0..5 {
            for q in 0..4 {
                let m = build_mollifier(q, 8, 1.0, seed).unwrap();
                for j in 0..=q {
                    let want = if j == 0 { Rational::one() } else { Rational::zero() };
                    assert_eq!(m.moment(j), want, "q={q} j={j} seed={seed}");
                }
            }
        }
        let m = build_mollifier(2, 6, 0.75, 9).unwrap();
        assert!(m.moment(1).is_zero() && m.moment(2).is_zero());
        // direct integration agrees with the closed form
        let l = m.l_exact().clone();
        let direct = (m.poly() * &RationalPoly::x().pow(3)).integrate(&-l.clone(), &l);
        assert_eq!(direct, m.moment(3));
    }

    #[test]
    fn smoothness_must_be_at_least_two() {
        assert!(matches!(build_mollifier(0, 1, 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn clamping_and_orders() {
        let m = build_mollifier(1, 6, 1.0, 4).unwrap();
        assert_eq!(m.eval_derivative(0, 1.0).unwrap(), 0.0);
        assert_eq!(m.eval_derivative(2, -1.5).unwrap(), 0.0);
        assert_eq!(m.eval_derivative(-1, 1.0).unwrap(), 1.0);
        assert_eq!(m.eval_derivative(-1, -3.0).unwrap(), 0.0);
        assert!((m.eval_derivative(-1, 0.999_999).unwrap() - 1.0).abs() < 1e-12);
        assert!(m.eval_derivative(6, 0.0).is_err());
        assert!(m.eval_derivative(-2, 0.0).is_err());
        assert!(m.eval_derivative(5, 0.3).is_ok());
        let sym = plain(0, 2, 1.0);
        assert_eq!(sym.eval_derivative(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn scaled_evaluation() {
        let m = build_mollifier(1, 6, 1.0, 2).unwrap();
        let phi0 = m.eval_derivative(0, 0.0).unwrap();
        assert!((m.eval_scaled(0, 0.5, 0.0).unwrap() - 2.0 * phi0).abs() < 1e-14);
        assert_eq!(m.eval_scaled(0, 0.01, 0.02).unwrap(), 0.0);
        let x = 0.37;
        assert_eq!(m.eval_scaled(1, 1.0, x).unwrap(), m.eval_derivative(1, x).unwrap());
        assert!(m.eval_scaled(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let m = build_mollifier(2, 8, 1.0, 11).unwrap();
        let h = 1e-6;
        for r in 1..8 {
            let scale = (0..100)
                .map(|i| m.eval_derivative(r, -0.99 + 1.98 * i as f64 / 99.0).unwrap().abs())
                .fold(1.0, f64::max);
            for i in 0..100 {
                let u = -0.99 + 1.98 * i as f64 / 99.0;
                let fd = (m.eval_derivative(r - 1, u + h).unwrap() - m.eval_derivative(r - 1, u - h).unwrap())
                    / (2.0 * h);
                let d = m.eval_derivative(r, u).unwrap();
                assert!((fd - d).abs() <= 1e-6 * scale, "r={r} u={u} fd={fd} d={d}");
            }
        }
    }

    #[test]
    fn half_mass_identity() {
        for seed in 0..4 {
            let m = build_mollifier(2, 6, 1.0, seed).unwrap();
            assert_eq!(m.half_mass(), rat(1, 2));
        }
        assert_eq!(plain(0, 3, 2.0).half_mass(), rat(1, 2));
    }

    #[test]
    fn seeds_separate_families() {
        let ms: Vec<_> = (0..6).map(|s| build_mollifier(1, 6, 1.0, s).unwrap()).collect();
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                assert_ne!(ms[i].l2_norm_sq(), ms[j].l2_norm_sq());
                assert_ne!(ms[i].first_moment_sq(), ms[j].first_moment_sq());
            }
        }
        assert!(!ms[0].first_moment_sq().is_zero());
    }

    #[test]
    fn record_round_trip() {
        let m = build_mollifier(2, 8, 0.5, 3).unwrap();
        let json = serde_json::to_string(&m.to_record()).unwrap();
        let back: MollifierRecord = serde_json::from_str(&json).unwrap();
        let m2 = Mollifier::from_record(&back).unwrap();
        assert_eq!(m, m2);
        assert_eq!(m2.to_record(), m.to_record());

        let mut bad = m.to_record();
        bad.coeffs[0] = "1".into();
        assert!(Mollifier::from_record(&bad).is_err());
    }

    #[test]
    fn support_radius_scales_moments() {
        let m = plain(0, 4, 2.0);
        assert_eq!(m.moment(0), rat(1, 1));
        assert_eq!(m.eval_derivative(0, 2.0).unwrap(), 0.0);
        assert!(m.eval_derivative(0, 1.9).unwrap() > 0.0);
    }
}
