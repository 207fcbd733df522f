//! ε-sweeps, asymptotic fits and verification of the product identities.

use crate::embeddings::{NuParams, Rep, Sign};
use crate::error::{Error, Result};
use crate::functionals::{action, action_scale, pair, Combo, Distribution, PairingResult, Product, TestFunction, TestFunctionSpec};
use crate::mollifier::{Mollifier, MollifierRecord};
use crate::poly::{rat_int, rat_to_f64, rat_to_string, Rational};
use crate::special::{binomial_real, factorial, near_pole, sin_pi, POLE_GUARD};
use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Geometric grid ε_k = eps0·ratio^k, k = 0..=steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    pub eps0: f64,
    pub ratio: f64,
    pub steps: u32,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self { eps0: 0.1, ratio: 0.6, steps: 12 }
    }
}

impl EpsilonGrid {
    pub fn new(eps0: f64, ratio: f64, steps: u32) -> Result<Self> {
        let g = Self { eps0, ratio, steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::config(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::config(format!("ratio must lie in (0, 1), got {}", self.ratio)));
        }
        if self.steps < 6 {
            return Err(Error::config(format!("at least 6 steps are required, got {}", self.steps)));
        }
        if self.eps0 * self.ratio.powi(self.steps as i32) < 1e-8 {
            return Err(Error::config("smallest eps falls below 1e-8"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.eps0 * self.ratio.powi(k as i32)).collect()
    }
}

/// F(ε_k) for the whole grid; ε-points are evaluated in parallel and
/// returned in grid order.
pub fn sweep(combo: &Combo, psi: &TestFunction, grid: &EpsilonGrid) -> Result<Vec<PairingResult>> {
    grid.validate()?;
    let terms = sweep_terms(combo, psi, grid)?;
    Ok(combine(combo, &terms))
}

/// Per-term sweeps (uncombined).
pub fn sweep_terms(combo: &Combo, psi: &TestFunction, grid: &EpsilonGrid) -> Result<Vec<Vec<PairingResult>>> {
    grid.validate()?;
    let points = grid.points();
    combo
        .terms
        .iter()
        .map(|(_, product)| sweep_product(product, psi, &points))
        .collect()
}

fn sweep_product(product: &Product, psi: &TestFunction, points: &[f64]) -> Result<Vec<PairingResult>> {
    points.par_iter().map(|&eps| pair(product, psi, eps)).collect()
}

fn combine(combo: &Combo, terms: &[Vec<PairingResult>]) -> Vec<PairingResult> {
    let n = terms.first().map_or(0, Vec::len);
    (0..n)
        .map(|k| {
            let mut value = 0.0;
            let mut err = 0.0;
            for ((c, _), t) in combo.terms.iter().zip(terms) {
                value += c * t[k].value;
                err += c.abs() * t[k].err;
            }
            PairingResult { epsilon: terms[0][k].epsilon, value, err }
        })
        .collect()
}

/// Least-squares model F(ε) ≈ Σ_j c_j ε^{j + shift}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub exponents: Vec<i32>,
    pub shift: f64,
    pub coefficients: Vec<f64>,
    /// root-mean-square residual
    pub residual: f64,
    /// max |F| over the data
    pub scale: f64,
    pub condition: f64,
}

pub const MAX_CONDITION: f64 = 1e12;

impl AsymptoticFit {
    pub fn coeff(&self, j: i32) -> f64 {
        self.exponents.iter().position(|&e| e == j).map_or(0.0, |i| self.coefficients[i])
    }

    /// Residual within 1e−6 of the data scale.
    pub fn is_reliable(&self) -> bool {
        self.residual <= 1e-6 * self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Exponent basis {lo..=hi}.
pub fn basis(lo: i32, hi: i32) -> Vec<i32> {
    (lo..=hi).collect()
}

pub fn fit(points: &[PairingResult], exponents: &[i32]) -> Result<AsymptoticFit> {
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let vals: Vec<f64> = points.iter().map(|p| p.value).collect();
    fit_values(&eps, &vals, exponents, 0.0)
}

/// Fit with exponents shifted by a real `shift` (the rescaled fits of
/// vanishing combinations).
pub fn fit_values(eps: &[f64], values: &[f64], exponents: &[i32], shift: f64) -> Result<AsymptoticFit> {
    fit_weighted(eps, values, exponents, shift, None)
}

/// Weighted least squares: row k is multiplied by `weights[k]`. Residual
/// and scale are reported for the weighted rows.
pub fn fit_weighted(
    eps: &[f64],
    values: &[f64],
    exponents: &[i32],
    shift: f64,
    weights: Option<&[f64]>,
) -> Result<AsymptoticFit> {
    let mut exps = exponents.to_vec();
    exps.sort_unstable();
    exps.dedup();
    if exps.len() != exponents.len() {
        return Err(Error::config("exponent basis contains duplicates"));
    }
    let n = eps.len();
    let k = exps.len();
    if n != values.len() {
        return Err(Error::config("epsilon and value vectors differ in length"));
    }
    if n < k + 2 {
        return Err(Error::config(format!("{n} points cannot support a {k}-term fit (need {})", k + 2)));
    }
    if eps.iter().any(|&e| !(e > 0.0)) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("fit data must have positive eps and finite values"));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != n => return Err(Error::config("weight vector differs in length")),
        Some(w) if w.iter().any(|x| !(*x > 0.0 && x.is_finite())) => {
            return Err(Error::config("weights must be positive"))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let mut a = DMatrix::<f64>::zeros(n, k);
    for (i, &e) in eps.iter().enumerate() {
        for (j, &p) in exps.iter().enumerate() {
            a[(i, j)] = w[i] * e.powf(f64::from(p) + shift);
        }
    }
    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    for (j, &nj) in norms.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / nj);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let b = DVector::from_iterator(n, values.iter().zip(&w).map(|(v, w)| v * w));
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let utb = u.transpose() * &b;
    let scaled = DVector::from_iterator(k, (0..k).map(|i| utb[i] / svd.singular_values[i]));
    let c_scaled = vt.transpose() * scaled;
    let coefficients: Vec<f64> = (0..k).map(|j| c_scaled[j] / norms[j]).collect();
    let fitted = &a * &c_scaled;
    let residual = ((&fitted - &b).norm_squared() / n as f64).sqrt();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(AsymptoticFit { exponents: exps, shift, coefficients, residual, scale, condition })
}

/// Claims of the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum Claim {
    /// x^{−p}·x^{−q} − π²(−1)^{p+q}/((p−1)!(q−1)!) δ^{(p−1)}·δ^{(q−1)} ≈ x^{−p−q}
    Mik { p: u32, q: u32 },
    /// ν₊^a·ν₋^b − ν₋^{a+b+1}·δ ≈ 0
    Thm1 { a: f64, b: f64 },
    /// ν₊^a·ν₋^{−a−2} − δ·δ ≈ −(a+1)/2 δ′
    Thm2 { a: f64 },
    /// x₊^a·x₋^{−a−2} + π/((a−1) sin πa) δ·δ ≈ π/(2 sin πa) δ′
    Thm2x { a: f64 },
    /// ν₊^a·ν₋^{−a−3} + (2a+3) δ·δ′ ≈ ½ C(a+2, 2) δ″
    Thm3 { a: f64 },
    /// −ν₊^a·ν₋^{−a−2} + ν₋^a·ν₊^{−a−2} ≈ (a+1) δ′
    Cor2 { a: f64 },
    /// ν₊^a·ν₋^{−a−3} + ν₋^a·ν₊^{−a−3} ≈ C(a+2, 2) δ″
    Cor3 { a: f64 },
    /// (−1)^p ν₊^a·ν₋^{−a−p−1} + ν₋^a·ν₊^{−a−p−1} ≈ C(a+p, p) δ^{(p)}
    Thm4 { a: f64, p: u32 },
}

pub const CLAIM_NAMES: [&str; 8] = ["mik", "thm1", "thm2", "thm2x", "thm3", "cor2", "cor3", "thm4"];

fn check_non_integer(a: f64) -> Result<()> {
    if !a.is_finite() || (a - a.round()).abs() < POLE_GUARD {
        return Err(Error::Validity(format!("a = {a} must be a non-integer real")));
    }
    Ok(())
}

fn check_omega(a: f64, name: &str) -> Result<()> {
    if !a.is_finite() || near_pole(a) {
        return Err(Error::Validity(format!("{name} = {a} must not be a negative integer")));
    }
    Ok(())
}

fn nu(sign: Sign, a: f64, m: &Arc<Mollifier>) -> Result<Rep> {
    Rep::nu(sign, NuParams::with_default_order(a)?, m)
}

fn sign_pow(p: u32) -> f64 {
    if p.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl Claim {
    /// Builds a claim from a name and the parameters that apply to it.
    pub fn from_parts(name: &str, a: Option<f64>, b: Option<f64>, p: Option<u32>, q: Option<u32>) -> Result<Self> {
        let need_a = || a.ok_or_else(|| Error::config(format!("claim {name} needs --a")));
        let need_p = || p.ok_or_else(|| Error::config(format!("claim {name} needs --p")));
        let claim = match name.to_ascii_lowercase().as_str() {
            "mik" => Claim::Mik { p: need_p()?, q: q.ok_or_else(|| Error::config("claim mik needs --q"))? },
            "thm1" => Claim::Thm1 { a: need_a()?, b: b.ok_or_else(|| Error::config("claim thm1 needs --b"))? },
            "thm2" => Claim::Thm2 { a: need_a()? },
            "thm2x" => Claim::Thm2x { a: need_a()? },
            "thm3" => Claim::Thm3 { a: need_a()? },
            "cor2" => Claim::Cor2 { a: need_a()? },
            "cor3" => Claim::Cor3 { a: need_a()? },
            "thm4" => Claim::Thm4 { a: need_a()?, p: need_p()? },
            other => return Err(Error::config(format!("unknown claim {other:?}; known: {}", CLAIM_NAMES.join(", ")))),
        };
        Ok(claim)
    }

    pub fn id(&self) -> String {
        match *self {
            Claim::Mik { p, q } => format!("MIK({p},{q})"),
            Claim::Thm1 { a, b } => format!("THM1(a={a},b={b})"),
            Claim::Thm2 { a } => format!("THM2(a={a})"),
            Claim::Thm2x { a } => format!("THM2X(a={a})"),
            Claim::Thm3 { a } => format!("THM3(a={a})"),
            Claim::Cor2 { a } => format!("COR2(a={a})"),
            Claim::Cor3 { a } => format!("COR3(a={a})"),
            Claim::Thm4 { a, p } => format!("THM4(a={a},p={p})"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Claim::Mik { .. } => "mik",
            Claim::Thm1 { .. } => "thm1",
            Claim::Thm2 { .. } => "thm2",
            Claim::Thm2x { .. } => "thm2x",
            Claim::Thm3 { .. } => "thm3",
            Claim::Cor2 { .. } => "cor2",
            Claim::Cor3 { .. } => "cor3",
            Claim::Thm4 { .. } => "thm4",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Claim::Mik { p, q } => {
                if p == 0 || q == 0 {
                    return Err(Error::Validity(format!("p = {p}, q = {q} must be positive integers")));
                }
            }
            Claim::Thm1 { a, b } => {
                check_omega(a, "a")?;
                check_omega(b, "b")?;
                if !(a + b > -2.0) {
                    return Err(Error::Validity(format!("a + b = {} must exceed -2", a + b)));
                }
            }
            Claim::Thm2 { a } | Claim::Thm2x { a } | Claim::Thm3 { a } | Claim::Cor2 { a } | Claim::Cor3 { a } => {
                check_non_integer(a)?
            }
            Claim::Thm4 { a, p } => {
                check_non_integer(a)?;
                if p == 0 {
                    return Err(Error::Validity("p must be a positive integer".into()));
                }
            }
        }
        Ok(())
    }

    /// Order of the strongest divergence ε^{−σ} of the individual terms.
    pub fn singular_order(&self) -> u32 {
        match *self {
            Claim::Mik { p, q } => p + q - 1,
            Claim::Thm1 { .. } => 0,
            Claim::Thm2 { .. } | Claim::Thm2x { .. } | Claim::Cor2 { .. } => 1,
            Claim::Thm3 { .. } | Claim::Cor3 { .. } => 2,
            Claim::Thm4 { p, .. } => p,
        }
    }

    /// Power of ε taken out before fitting. For THM1 both terms scale like
    /// ε^{a+b+1}·(c₀ + c₁ε + …); the fit is done on ε^{−(a+b+1)}F so the
    /// leading coefficients of the two terms can be compared.
    pub fn shift(&self) -> f64 {
        match *self {
            Claim::Thm1 { a, b } => a + b + 1.0,
            _ => 0.0,
        }
    }

    pub fn exponent_basis(&self) -> Vec<i32> {
        match self {
            Claim::Thm1 { .. } => basis(-1, 2),
            _ => basis(-(self.singular_order() as i32) - 1, 2),
        }
    }

    /// Largest derivative order of φ the claim needs.
    pub fn max_order(&self) -> u32 {
        let r = |a: f64| crate::embeddings::default_order(a);
        match *self {
            Claim::Mik { p, q } => p.max(q),
            Claim::Thm1 { a, b } => r(a).max(r(b)).max(r(a + b + 1.0)),
            Claim::Thm2 { a } | Claim::Thm2x { a } | Claim::Cor2 { a } => r(a).max(r(-a - 2.0)),
            Claim::Thm3 { a } | Claim::Cor3 { a } => r(a).max(r(-a - 3.0)).max(1),
            Claim::Thm4 { a, p } => r(a).max(r(-a - f64::from(p) - 1.0)),
        }
    }

    /// Highest ψ-derivative the claim's right-hand side and fit involve.
    pub fn psi_order(&self) -> u32 {
        match *self {
            Claim::Mik { p, q } => p + q,
            _ => self.singular_order() + 3,
        }
    }

    /// Left-hand side as a combination of products.
    pub fn lhs(&self, m: &Arc<Mollifier>) -> Result<Combo> {
        self.validate()?;
        let d = |p: u32| Rep::delta(p, m);
        let prod = |f: Rep, g: Rep| Product::new(f, [g]);
        let combo = match *self {
            Claim::Mik { p, q } => {
                let c = PI * PI * sign_pow(p + q) / (factorial(p - 1) * factorial(q - 1));
                Combo::new()
                    .term(1.0, prod(Rep::x_neg_power(p, m)?, Rep::x_neg_power(q, m)?)?)
                    .term(-c, prod(d(p - 1)?, d(q - 1)?)?)
            }
            Claim::Thm1 { a, b } => Combo::new()
                .term(1.0, prod(nu(Sign::Plus, a, m)?, nu(Sign::Minus, b, m)?)?)
                .term(-1.0, prod(nu(Sign::Minus, a + b + 1.0, m)?, d(0)?)?),
            Claim::Thm2 { a } => Combo::new()
                .term(1.0, prod(nu(Sign::Plus, a, m)?, nu(Sign::Minus, -a - 2.0, m)?)?)
                .term(-1.0, prod(d(0)?, d(0)?)?),
            Claim::Thm2x { a } => {
                let xp = Rep::x_pm(Sign::Plus, NuParams::with_default_order(a)?, m)?;
                let xm = Rep::x_pm(Sign::Minus, NuParams::with_default_order(-a - 2.0)?, m)?;
                Combo::new().term(1.0, prod(xp, xm)?).term(PI / ((a - 1.0) * sin_pi(a)), prod(d(0)?, d(0)?)?)
            }
            Claim::Thm3 { a } => Combo::new()
                .term(1.0, prod(nu(Sign::Plus, a, m)?, nu(Sign::Minus, -a - 3.0, m)?)?)
                .term(2.0 * a + 3.0, prod(d(0)?, d(1)?)?),
            Claim::Cor2 { a } => Combo::new()
                .term(-1.0, prod(nu(Sign::Plus, a, m)?, nu(Sign::Minus, -a - 2.0, m)?)?)
                .term(1.0, prod(nu(Sign::Minus, a, m)?, nu(Sign::Plus, -a - 2.0, m)?)?),
            Claim::Cor3 { a } => Combo::new()
                .term(1.0, prod(nu(Sign::Plus, a, m)?, nu(Sign::Minus, -a - 3.0, m)?)?)
                .term(1.0, prod(nu(Sign::Minus, a, m)?, nu(Sign::Plus, -a - 3.0, m)?)?),
            Claim::Thm4 { a, p } => {
                let b = -a - f64::from(p) - 1.0;
                Combo::new()
                    .term(sign_pow(p), prod(nu(Sign::Plus, a, m)?, nu(Sign::Minus, b, m)?)?)
                    .term(1.0, prod(nu(Sign::Minus, a, m)?, nu(Sign::Plus, b, m)?)?)
            }
        };
        Ok(combo)
    }

    /// Right-hand side coefficient·distribution.
    pub fn rhs(&self) -> (f64, Distribution) {
        match *self {
            Claim::Mik { p, q } => (1.0, Distribution::XNegPower(p + q)),
            Claim::Thm1 { .. } => (0.0, Distribution::Zero),
            Claim::Thm2 { a } => (-(a + 1.0) / 2.0, Distribution::DeltaP(1)),
            Claim::Thm2x { a } => (PI / (2.0 * sin_pi(a)), Distribution::DeltaP(1)),
            Claim::Thm3 { a } => (0.5 * binomial_real(a + 2.0, 2), Distribution::DeltaP(2)),
            Claim::Cor2 { a } => (a + 1.0, Distribution::DeltaP(1)),
            Claim::Cor3 { a } => (binomial_real(a + 2.0, 2), Distribution::DeltaP(2)),
            Claim::Thm4 { a, p } => (binomial_real(a + f64::from(p), i64::from(p)), Distribution::DeltaP(p)),
        }
    }

    /// The claim's parameters as a JSON object.
    pub fn params(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("claim serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("id");
        }
        v
    }
}

/// Mollifier descriptor in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifierInfo {
    pub q: u32,
    pub s: u32,
    pub l: String,
    pub seed: u64,
    pub d: u32,
    pub l2_norm_sq: String,
    pub first_moment_sq: String,
}

impl MollifierInfo {
    pub fn of(m: &Mollifier) -> Self {
        let MollifierRecord { l, s, q, d, seed, .. } = m.to_record();
        Self {
            q,
            s,
            l,
            seed,
            d,
            l2_norm_sq: rat_to_string(&m.l2_norm_sq()),
            first_moment_sq: rat_to_string(&m.first_moment_sq()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub mollifier: usize,
    pub psi: String,
    pub exponents: Vec<i32>,
    pub shift: f64,
    pub coeffs: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
    pub reliable: bool,
    /// leading coefficient of each individual term (same basis)
    pub term_coeffs: Vec<Vec<f64>>,
    /// c₀ with one more positive power in the basis
    pub c0_extended_basis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C0Check {
    pub mollifier: usize,
    pub psi: String,
    pub expected: f64,
    pub got: f64,
    pub rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceCheck {
    pub mollifier: usize,
    pub psi: String,
    /// max |c_j| over j < 0 for the combination
    pub max_abs: f64,
    /// max |c_j| over j ≤ 0 among the individual terms
    pub term_scale: f64,
    pub rel: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadCheck {
    pub psi: String,
    pub c0: Vec<f64>,
    pub max_rel_dev: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimReport {
    pub claim_id: String,
    pub claim: String,
    pub params: serde_json::Value,
    pub lhs: String,
    pub rhs: String,
    pub mollifiers: Vec<MollifierInfo>,
    pub psis: Vec<TestFunctionSpec>,
    pub grid: EpsilonGrid,
    pub tol: f64,
    pub fits: Vec<FitRecord>,
    pub c0_checks: Vec<C0Check>,
    pub divergence_checks: Vec<DivergenceCheck>,
    pub spread_checks: Vec<SpreadCheck>,
    /// largest relative divergent coefficient of the combination
    pub divergent_max: f64,
    pub verdict: String,
    pub diagnostics: Vec<String>,
}

impl ClaimReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

/// Row weights ε^σ: the absolute error of F(ε) grows like the individual
/// terms, i.e. like ε^{−σ}, so this equalises the noise across the grid.
pub fn claim_weights(claim: &Claim, eps: &[f64]) -> Vec<f64> {
    let sigma = claim.singular_order() as i32;
    eps.iter().map(|e| e.powi(sigma)).collect()
}

/// Outcome for one (mollifier, ψ) pair.
struct PairOutcome {
    fit: FitRecord,
    c0: f64,
    expected: f64,
    denom: f64,
    divergence: DivergenceCheck,
    /// (coefficient of the second term cancelling the leading divergence, c₀ with it)
    balancing: Option<(f64, f64)>,
}

fn analyse(
    claim: &Claim,
    combo: &Combo,
    mi: usize,
    psi: &TestFunction,
    grid: &EpsilonGrid,
    tol: f64,
) -> Result<PairOutcome> {
    let terms = sweep_terms(combo, psi, grid)?;
    let total = combine(combo, &terms);
    let eps: Vec<f64> = total.iter().map(|r| r.epsilon).collect();
    let shift = claim.shift();
    let rescale = |v: f64, e: f64| if shift == 0.0 { v } else { v * e.powf(-shift) };
    let values: Vec<f64> = total.iter().map(|r| rescale(r.value, r.epsilon)).collect();
    let exps = claim.exponent_basis();
    let weights = claim_weights(claim, &eps);
    let w = Some(weights.as_slice());
    let f = fit_weighted(&eps, &values, &exps, 0.0, w)?;
    let mut ext = exps.clone();
    ext.push(exps.last().copied().unwrap_or(0) + 1);
    let c0_extended = fit_weighted(&eps, &values, &ext, 0.0, w).map(|g| g.coeff(0)).unwrap_or(f64::NAN);

    let mut term_coeffs = Vec::new();
    let mut term_scale = 0.0f64;
    let mut data_scale = f.scale;
    for t in &terms {
        let tv: Vec<f64> = t.iter().map(|r| rescale(r.value, r.epsilon)).collect();
        let tf = fit_weighted(&eps, &tv, &exps, 0.0, w)?;
        data_scale = data_scale.max(tf.scale);
        if let Claim::Thm1 { .. } = claim {
            // no divergence and possibly c₀ = 0 (ψ(0) = 0): use the size of the values
            term_scale = term_scale.max(tf.scale);
        } else {
            for (&j, &c) in tf.exponents.iter().zip(&tf.coefficients) {
                if j <= 0 {
                    term_scale = term_scale.max(c.abs());
                }
            }
        }
        term_coeffs.push(tf.coefficients);
    }
    // coefficient of the strongest divergence that makes the two terms cancel
    // the strongest divergence the balancing term actually carries; below
    // that, or with ψ vanishing at 0, the coefficients are fit noise
    let balanced = matches!(claim, Claim::Mik { .. } | Claim::Thm2 { .. } | Claim::Thm2x { .. } | Claim::Thm3 { .. });
    let balancing = if balanced && terms.len() == 2 {
        let j0 = exps.iter().position(|&e| e == 0);
        let lead = exps
            .iter()
            .enumerate()
            .filter(|(_, &e)| e < 0)
            .map(|(i, _)| (term_coeffs[0][i], term_coeffs[1][i]))
            .find(|(t0, t1)| t0.abs().min(t1.abs()) > 1e-6 * term_scale);
        j0.zip(lead).map(|(j0, (t0, t1))| {
            let b = -combo.terms[0].0 * t0 / t1;
            (b, combo.terms[0].0 * term_coeffs[0][j0] + b * term_coeffs[1][j0])
        })
    } else {
        None
    };

    let max_abs = f
        .exponents
        .iter()
        .zip(&f.coefficients)
        .filter(|(&j, _)| j < 0)
        .fold(0.0f64, |m, (_, c)| m.max(c.abs()));
    let rel = if term_scale > 0.0 { max_abs / term_scale } else { max_abs };
    let divergence = DivergenceCheck { mollifier: mi, psi: psi.name().into(), max_abs, term_scale, rel, pass: rel <= tol };

    let (coef, dist) = claim.rhs();
    let expected = coef * action(&dist, psi)?;
    let natural = coef.abs() * action_scale(&dist, psi)?;
    let denom = match claim {
        // the limit is 0; compare against the size of the individual terms
        Claim::Thm1 { .. } => term_scale,
        _ if expected.abs() > 1e-12 * natural => expected.abs(),
        _ => natural,
    };
    let fit = FitRecord {
        mollifier: mi,
        psi: psi.name().into(),
        exponents: f.exponents.clone(),
        shift,
        coeffs: f.coefficients.clone(),
        residual: f.residual,
        condition: f.condition,
        reliable: f.residual <= 1e-6 * data_scale,
        term_coeffs,
        c0_extended_basis: c0_extended,
    };
    Ok(PairOutcome { fit, c0: f.coeff(0), expected, denom, divergence, balancing })
}

/// Checks a claim for every (mollifier, ψ) pair: divergent coefficients
/// cancel, c₀ matches the right-hand side, and c₀ does not depend on the
/// mollifier.
pub fn verify_claim(
    claim: &Claim,
    mollifiers: &[Arc<Mollifier>],
    psis: &[TestFunction],
    grid: &EpsilonGrid,
    tol: f64,
) -> Result<ClaimReport> {
    claim.validate()?;
    grid.validate()?;
    if mollifiers.len() < 2 {
        return Err(Error::config("at least two mollifiers are required"));
    }
    if psis.len() < 2 {
        return Err(Error::config("at least two test functions are required"));
    }
    if !(tol > 0.0) {
        return Err(Error::config(format!("tolerance must be positive, got {tol}")));
    }
    let need = claim.max_order();
    for m in mollifiers {
        if m.s() < need + 2 {
            return Err(Error::config(format!(
                "claim {} needs derivative order {need}: smoothness s = {} must be at least {}",
                claim.id(),
                m.s(),
                need + 2
            )));
        }
    }
    for psi in psis {
        if psi.smoothness() < claim.psi_order().min(claim.singular_order() + 2) {
            return Err(Error::config(format!("test function {} is not smooth enough", psi.name())));
        }
    }
    let combos = mollifiers.iter().map(|m| claim.lhs(m)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..mollifiers.len()).flat_map(|mi| (0..psis.len()).map(move |pi| (mi, pi))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(mi, pi)| analyse(claim, &combos[mi], mi, &psis[pi], grid, tol))
        .collect::<Result<Vec<_>>>()?;

    let mut diagnostics = Vec::new();
    let mut c0_checks = Vec::new();
    let mut divergence_checks = Vec::new();
    let mut fits = Vec::new();
    for o in &outcomes {
        let rel_err = (o.c0 - o.expected).abs() / o.denom.max(f64::MIN_POSITIVE);
        c0_checks.push(C0Check {
            mollifier: o.fit.mollifier,
            psi: o.fit.psi.clone(),
            expected: o.expected,
            got: o.c0,
            rel_err,
            pass: rel_err <= tol,
        });
        if !o.fit.reliable {
            diagnostics.push(format!(
                "fit residual {:.3e} above 1e-6 of the term scale for mollifier {} / {}",
                o.fit.residual, o.fit.mollifier, o.fit.psi
            ));
        }
        let shift = (o.fit.c0_extended_basis - o.c0).abs() / o.denom.max(f64::MIN_POSITIVE);
        if shift > tol {
            diagnostics.push(format!(
                "c0 moves by {shift:.3e} (relative) when the basis is extended, mollifier {} / {}",
                o.fit.mollifier, o.fit.psi
            ));
        }
        divergence_checks.push(o.divergence.clone());
        fits.push(o.fit.clone());
    }
    for o in &outcomes {
        let Some((b, c0b)) = o.balancing else { continue };
        let c1 = combos[o.fit.mollifier].terms[1].0;
        if ((b - c1) / b).abs() > tol {
            diagnostics.push(format!(
                "balancing coefficient that cancels the leading divergence is {b:.10} (claim uses {c1:.10}); \
                 with it c0 = {c0b:.10} for mollifier {} / {}",
                o.fit.mollifier, o.fit.psi
            ));
        }
    }

    let mut spread_checks = Vec::new();
    for psi in psis {
        let row: Vec<&PairOutcome> = outcomes.iter().filter(|o| o.fit.psi == psi.name()).collect();
        let c0: Vec<f64> = row.iter().map(|o| o.c0).collect();
        let denom = row.iter().map(|o| o.denom).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        let mut dev = 0.0f64;
        for i in 0..c0.len() {
            for j in i + 1..c0.len() {
                dev = dev.max((c0[i] - c0[j]).abs() / denom);
            }
        }
        spread_checks.push(SpreadCheck { psi: psi.name().into(), c0, max_rel_dev: dev, pass: dev <= tol });
    }

    let divergent_max = divergence_checks.iter().map(|d| d.rel).fold(0.0f64, f64::max);
    let pass = c0_checks.iter().all(|c| c.pass)
        && divergence_checks.iter().all(|d| d.pass)
        && spread_checks.iter().all(|s| s.pass);
    let (coef, dist) = claim.rhs();
    Ok(ClaimReport {
        claim_id: claim.id(),
        claim: claim.name().into(),
        params: claim.params(),
        lhs: combos[0].describe(),
        rhs: format!("({coef}) {dist}"),
        mollifiers: mollifiers.iter().map(|m| MollifierInfo::of(m)).collect(),
        psis: psis.iter().map(TestFunction::to_spec).collect(),
        grid: *grid,
        tol,
        fits,
        c0_checks,
        divergence_checks,
        spread_checks,
        divergent_max,
        verdict: if pass { "pass" } else { "fail" }.into(),
        diagnostics,
    })
}

/// Exact I_{n,t} = ∫ u^{n−t}/(n−t)!·φ(u)·φ^{(p−t−1)}(u) du.
fn proof_integral(m: &Mollifier, p: u32, n: u32, t: u32) -> Result<Rational> {
    let l = m.l_exact().clone();
    let k = n - t;
    let mut monomial = vec![Rational::zero(); k as usize + 1];
    monomial[k as usize] = Rational::one() / factorial_exact(k);
    let mono = crate::poly::RationalPoly::new(monomial);
    let g = m.exact_derivative(p as i32 - t as i32 - 1)?;
    Ok((&(&mono * m.poly()) * g).integrate(&-l.clone(), &l))
}

fn factorial_exact(n: u32) -> Rational {
    (1..=n).fold(Rational::one(), |acc, k| acc * rat_int(i64::from(k)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumCheck {
    pub n: u32,
    pub s1: f64,
    pub s2: f64,
    pub residual: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofStepReport {
    pub p: u32,
    pub a: f64,
    pub sums: Vec<SumCheck>,
    /// I_{p,p} = ∫ φ φ^{(−1)} (exactly 1/2)
    pub half_mass: String,
    pub r1: f64,
    pub r2: f64,
    pub r_sum: f64,
    pub r_expected: f64,
    pub pass: bool,
}

/// Intermediate cancellations of the general-order proof: with
/// S₁(n) = Σ_t C(−a−1, t) I_{n,t} and S₂(n) = Σ_t C(a+p, t) I_{n,t}
/// (t ≤ n, the t = n = p term left out), (−1)^p S₁(n) + S₂(n) = 0 for
/// n = 0..p; and (−1)^p R₁ + R₂ = C(a+p, p)⟨δ^{(p)}, ψ⟩.
pub fn proof_step_check(p: u32, a: f64, m: &Mollifier, psi: &TestFunction) -> Result<ProofStepReport> {
    check_non_integer(a)?;
    if p == 0 {
        return Err(Error::Validity("p must be a positive integer".into()));
    }
    if p as i32 - 1 > m.max_order() {
        return Err(Error::config(format!("order p - 1 = {} exceeds s - 1 = {}", p - 1, m.max_order())));
    }
    let sp = sign_pow(p);
    let mut sums = Vec::new();
    for n in 0..=p {
        let (mut s1, mut s2, mut scale) = (0.0, 0.0, 0.0);
        for t in 0..=n {
            if n == p && t == p {
                continue;
            }
            let i = rat_to_f64(&proof_integral(m, p, n, t)?);
            let b1 = binomial_real(-a - 1.0, i64::from(t));
            let b2 = binomial_real(a + f64::from(p), i64::from(t));
            s1 += b1 * i;
            s2 += b2 * i;
            scale += (b1.abs() + b2.abs()) * i.abs();
        }
        let residual = sp * s1 + s2;
        sums.push(SumCheck { n, s1, s2, residual, scale, pass: residual.abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE) });
    }
    let half = proof_integral(m, p, p, p)?;
    let psi_p = psi.derivative_at_zero_f64(p);
    let r1 = 0.5 * sp * psi_p * binomial_real(-a - 1.0, i64::from(p));
    let r2 = 0.5 * sp * psi_p * binomial_real(a + f64::from(p), i64::from(p));
    let r_sum = sp * r1 + r2;
    let r_expected = binomial_real(a + f64::from(p), i64::from(p)) * action(&Distribution::DeltaP(p), psi)?;
    let r_ok = (r_sum - r_expected).abs() <= 1e-12 * r_expected.abs().max(psi_p.abs()).max(f64::MIN_POSITIVE);
    let pass = sums.iter().all(|s| s.pass) && r_ok && half == Rational::new(1.into(), 2.into());
    Ok(ProofStepReport { p, a, sums, half_mass: rat_to_string(&half), r1, r2, r_sum, r_expected, pass })
}
