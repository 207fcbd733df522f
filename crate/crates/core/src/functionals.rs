//! Test functions, pointwise products of representatives, the pairing
//! F(ε) = ∫ f(φ_ε, x) ψ(x) dx and closed-form distribution actions.

use crate::embeddings::{Kind, Rep, Sign, Support};
use crate::error::{Error, Result};
use crate::mollifier::Mollifier;
use crate::poly::{rat_from_f64, rat_int, rat_parse, rat_to_f64, rat_to_string, ChebPoly, Rational, RationalPoly};
use crate::quadrature::{
    gauss_jacobi, gauss_legendre, gauss_log, integrate_adaptive, integrate_log_endpoint, AdaptiveOptions,
    GaussRule,
};
use crate::special::{factorial, gamma};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::{Arc, OnceLock};

/// ψ(x) = (1 − (x/L)²)^m · Q(x) on [−L, L], zero outside.
#[derive(Debug, Clone)]
pub struct TestFunction {
    radius: Rational,
    radius_f64: f64,
    m: u32,
    q: RationalPoly,
    poly: RationalPoly,
    /// ψ^{(n)} for n = 0..=deg
    cheb: Vec<ChebPoly>,
    name: String,
}

/// Serializable description of a test function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    #[serde(default)]
    pub name: String,
    pub radius: String,
    pub m: u32,
    /// ascending coefficients of Q as "p/q" strings
    pub q: Vec<String>,
}

impl TestFunction {
    pub fn new(radius: f64, m: u32, q_coeffs: Vec<Rational>) -> Result<Self> {
        let r = rat_from_f64(radius)
            .filter(|r| r.is_positive())
            .ok_or_else(|| Error::config(format!("test-function radius must be positive, got {radius}")))?;
        Self::from_exact(r, m, q_coeffs)
    }

    pub fn from_exact(radius: Rational, m: u32, q_coeffs: Vec<Rational>) -> Result<Self> {
        if m < 2 {
            return Err(Error::config(format!("test-function smoothness m must be at least 2, got {m}")));
        }
        if !radius.is_positive() {
            return Err(Error::config("test-function radius must be positive"));
        }
        let q = RationalPoly::new(q_coeffs);
        if q.is_zero() {
            return Err(Error::config("test function must not vanish identically"));
        }
        let bump = RationalPoly::new(vec![Rational::one(), Rational::zero(), -(Rational::one() / (&radius * &radius))])
            .pow(m);
        let poly = &bump * &q;
        let mut cheb = Vec::new();
        let mut d = poly.clone();
        while !d.is_zero() {
            cheb.push(ChebPoly::from_poly(&d, &radius));
            d = d.derivative();
        }
        let name = format!("L={} m={} Q={}", rat_to_string(&radius), m, q);
        Ok(Self { radius_f64: rat_to_f64(&radius), radius, m, q, poly, cheb, name })
    }

    pub fn from_spec(spec: &TestFunctionSpec) -> Result<Self> {
        let radius = rat_parse(&spec.radius).ok_or_else(|| Error::config(format!("bad radius {:?}", spec.radius)))?;
        let q = spec
            .q
            .iter()
            .map(|c| rat_parse(c).ok_or_else(|| Error::config(format!("bad rational {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut psi = Self::from_exact(radius, spec.m, q)?;
        if !spec.name.is_empty() {
            psi.name = spec.name.clone();
        }
        Ok(psi)
    }

    pub fn to_spec(&self) -> TestFunctionSpec {
        TestFunctionSpec {
            name: self.name.clone(),
            radius: rat_to_string(&self.radius),
            m: self.m,
            q: self.q.coeffs().iter().map(rat_to_string).collect(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> f64 {
        self.radius_f64
    }

    pub fn smoothness(&self) -> u32 {
        self.m
    }

    pub fn poly(&self) -> &RationalPoly {
        &self.poly
    }

    /// Exact ψ^{(n)}(0).
    pub fn derivative_at_zero(&self, n: u32) -> Rational {
        self.poly.coeff(n as usize) * factorial_exact(n)
    }

    pub fn derivative_at_zero_f64(&self, n: u32) -> f64 {
        rat_to_f64(&self.derivative_at_zero(n))
    }

    /// ψ^{(n)}(x), zero outside (−L, L).
    pub fn eval_derivative(&self, n: u32, x: f64) -> f64 {
        if x.abs() >= self.radius_f64 {
            return 0.0;
        }
        self.cheb.get(n as usize).map_or(0.0, |c| c.eval(x))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_derivative(0, x)
    }

    pub fn degree(&self) -> usize {
        self.poly.degree().unwrap_or(0)
    }
}

fn factorial_exact(n: u32) -> Rational {
    (1..=n).fold(Rational::one(), |acc, k| acc * rat_int(i64::from(k)))
}

/// Test-function support radius and smoothness of the default set.
pub const DEFAULT_PSI_RADIUS: i64 = 2;
pub const DEFAULT_PSI_SMOOTHNESS: u32 = 8;

fn q_from(coeffs: &[(i64, i64)]) -> Vec<Rational> {
    coeffs.iter().map(|&(n, d)| Rational::new(n.into(), d.into())).collect()
}

/// Even ψ (ψ′(0) = 0), generic ψ (no vanishing derivative at 0 up to high
/// order) and ψ with ψ(0) = 0.
pub fn default_test_functions() -> Vec<TestFunction> {
    let radius = rat_int(DEFAULT_PSI_RADIUS);
    let m = DEFAULT_PSI_SMOOTHNESS;
    let even = TestFunction::from_exact(radius.clone(), m, q_from(&[(1, 1), (0, 1), (1, 2)])).expect("valid");
    let generic = TestFunction::from_exact(
        radius.clone(),
        m,
        q_from(&[(1, 1), (1, 2), (1, 3), (1, 5), (1, 7), (1, 11), (1, 13), (1, 17)]),
    )
    .expect("valid");
    let vanishing = TestFunction::from_exact(radius, m, q_from(&[(0, 1), (1, 1), (1, 3), (1, 4)])).expect("valid");
    vec![even.named("even"), generic.named("generic"), vanishing.named("vanishing")]
}

/// Pointwise product of representatives on one mollifier.
#[derive(Debug, Clone)]
pub struct Product {
    factors: Vec<Rep>,
    plan: Arc<OnceLock<Option<CompactPlan>>>,
}

impl From<Rep> for Product {
    fn from(rep: Rep) -> Self {
        Self { factors: vec![rep], plan: Arc::default() }
    }
}

/// Pointwise product; both operands must use the same mollifier.
pub fn multiply(f: &Product, g: &Product) -> Result<Product> {
    let (mf, mg) = (f.mollifier(), g.mollifier());
    if !Arc::ptr_eq(mf, mg) && **mf != **mg {
        return Err(Error::config("factors use different mollifiers"));
    }
    let mut factors = f.factors.clone();
    factors.extend(g.factors.iter().cloned());
    Ok(Product { factors, plan: Arc::default() })
}

impl Product {
    pub fn new(first: Rep, rest: impl IntoIterator<Item = Rep>) -> Result<Self> {
        rest.into_iter()
            .try_fold(Product::from(first), |acc, r| multiply(&acc, &Product::from(r)))
    }

    pub fn factors(&self) -> &[Rep] {
        &self.factors
    }

    pub fn mollifier(&self) -> &Arc<Mollifier> {
        self.factors[0].mollifier()
    }

    pub fn support(&self) -> Support {
        self.factors
            .iter()
            .fold(Support::Interval { lo: None, hi: None }, |s, f| s.intersect(f.support()))
    }

    /// Σκ, or `None` when a logarithm is involved.
    pub fn exponent(&self) -> Option<f64> {
        self.factors.iter().map(Rep::exponent).sum()
    }

    pub fn eval(&self, eps: f64, x: f64) -> Result<f64> {
        let mut acc = 1.0;
        for f in &self.factors {
            acc *= f.eval(eps, x)?;
            if acc == 0.0 {
                break;
            }
        }
        Ok(acc)
    }

    pub fn describe(&self) -> String {
        self.factors.iter().map(describe_rep).collect::<Vec<_>>().join(" * ")
    }

    fn compact_plan(&self) -> Result<Option<&CompactPlan>> {
        if let Some(p) = self.plan.get() {
            return Ok(p.as_ref());
        }
        let plan = CompactPlan::build(self)?;
        Ok(self.plan.get_or_init(|| plan).as_ref())
    }
}

fn describe_rep(r: &Rep) -> String {
    match r.kind() {
        Kind::DeltaP(p) => format!("delta^({p})"),
        Kind::NuPlus(n) => format!("nu+^({})[r={}]", n.a(), n.r()),
        Kind::NuMinus(n) => format!("nu-^({})[r={}]", n.a(), n.r()),
        Kind::XPlusA(n) => format!("x+^({})[r={}]", n.a(), n.r()),
        Kind::XMinusA(n) => format!("x-^({})[r={}]", n.a(), n.r()),
        Kind::LogAbs => "ln|x|".into(),
        Kind::XNegPower(p) => format!("x^(-{p})"),
        Kind::Zero => "0".into(),
    }
}

/// Linear combination Σ c_k·product_k.
#[derive(Debug, Clone, Default)]
pub struct Combo {
    pub terms: Vec<(f64, Product)>,
}

impl Combo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, coeff: f64, product: Product) -> Self {
        self.terms.push((coeff, product));
        self
    }

    pub fn describe(&self) -> String {
        self.terms
            .iter()
            .map(|(c, p)| format!("({c}) {}", p.describe()))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// F(ε) with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingResult {
    pub epsilon: f64,
    pub value: f64,
    pub err: f64,
}

impl PairingResult {
    /// Error estimate within 1e−8·max(1, |value|).
    pub fn is_reliable(&self) -> bool {
        self.err <= 1e-8 * self.value.abs().max(1.0)
    }
}

/// Gauss–Jacobi data for a product supported in [−l, l] whose profile is
/// (1+w/l)^β (1−w/l)^α times a polynomial. Profile values at the nodes do not
/// depend on ε and are computed once.
#[derive(Debug, Clone)]
struct CompactPlan {
    kappa: f64,
    /// (w_i, W_i·R(w_i)·l) for the primary and the refined rule
    coarse: Vec<(f64, f64)>,
    fine: Vec<(f64, f64)>,
}

const MIN_OUTER_NODES: usize = 40;

impl CompactPlan {
    fn build(product: &Product) -> Result<Option<Self>> {
        let Support::Interval { lo: Some(_), hi: Some(_) } = product.support() else {
            return Ok(None);
        };
        if !product.factors.iter().all(Rep::is_algebraic) {
            return Ok(None);
        }
        let kappa = product.exponent().expect("algebraic factors have exponents");
        let (mut beta, mut alpha) = (0.0, 0.0);
        let mut degree = 0;
        for f in &product.factors {
            let (b, a) = f.endpoint_exponents();
            beta += b;
            alpha += a;
            degree += f.poly_degree();
        }
        let l = product.mollifier().l();
        let n = (degree / 2 + 8).max(MIN_OUTER_NODES);
        let tabulate = |rule: GaussRule| -> Vec<(f64, f64)> {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &wt)| {
                    let w = l * x;
                    let r: f64 = product.factors.iter().map(|f| f.profile_regular(w)).product();
                    (w, wt * r * l)
                })
                .collect()
        };
        let coarse = tabulate(gauss_jacobi(n, alpha, beta)?);
        let fine = tabulate(gauss_jacobi(n + 8, alpha, beta)?);
        Ok(Some(Self { kappa, coarse, fine }))
    }

    fn pair(&self, psi: &TestFunction, eps: f64) -> (f64, f64) {
        let scale = eps.powf(self.kappa + 1.0);
        let sum = |tab: &[(f64, f64)]| tab.iter().map(|&(w, c)| c * psi.eval(eps * w)).sum::<f64>();
        let (a, b) = (sum(&self.coarse), sum(&self.fine));
        (scale * b, scale * (a - b).abs())
    }
}

/// Options of the pairing quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOptions {
    pub rel_tol: f64,
    pub max_panels: usize,
    /// extra uniform bisections of the initial panels (convergence checks)
    pub refine: u32,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_panels: 20_000, refine: 0 }
    }
}

/// F(ε) = ∫ f(φ_ε, x) ψ(x) dx.
pub fn pair(f: &Product, psi: &TestFunction, eps: f64) -> Result<PairingResult> {
    pair_with(f, psi, eps, PairOptions::default())
}

pub fn pair_with(f: &Product, psi: &TestFunction, eps: f64, opts: PairOptions) -> Result<PairingResult> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::config(format!("eps must be positive, got {eps}")));
    }
    let support = f.support();
    if support == Support::Empty {
        return Ok(PairingResult { epsilon: eps, value: 0.0, err: 0.0 });
    }
    let l = f.mollifier().l();
    let big = psi.radius();
    if eps * l < big && opts.refine == 0 {
        if let Some(plan) = f.compact_plan()? {
            let (value, err) = plan.pair(psi, eps);
            return Ok(PairingResult { epsilon: eps, value, err });
        }
    }
    pair_adaptive(f, psi, eps, support, opts).map_err(|e| e.at_eps(eps))
}

fn pair_adaptive(f: &Product, psi: &TestFunction, eps: f64, support: Support, opts: PairOptions) -> Result<PairingResult> {
    let l = f.mollifier().l();
    let big = psi.radius();
    let Support::Interval { lo, hi } = support else { unreachable!() };
    let lo = lo.map_or(-big, |w| (eps * w).max(-big));
    let hi = hi.map_or(big, |w| (eps * w).min(big));
    if lo >= hi {
        return Ok(PairingResult { epsilon: eps, value: 0.0, err: 0.0 });
    }
    let mut breaks = vec![lo, hi, 0.0];
    let mut h = eps * l;
    while h < big {
        breaks.extend([h, -h]);
        if h == eps * l {
            breaks.extend([1.1 * h, -1.1 * h, 0.5 * h, -0.5 * h]);
        }
        h *= 2.0;
    }
    breaks.retain(|&b| b >= lo && b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    for _ in 0..opts.refine {
        let mut finer = Vec::with_capacity(2 * breaks.len());
        for w in breaks.windows(2) {
            finer.extend([w[0], 0.5 * (w[0] + w[1])]);
        }
        finer.push(*breaks.last().expect("non-empty"));
        breaks = finer;
    }
    let mut failure = None;
    let est = integrate_adaptive(
        |x| match f.eval(eps, x) {
            Ok(v) => v * psi.eval(x),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        AdaptiveOptions { abs_tol: 0.0, rel_tol: opts.rel_tol, max_panels: opts.max_panels, cancel_factor: 1.0 },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PairingResult { epsilon: eps, value: est.value, err: est.error })
}

/// Σ c_k·pair(product_k).
pub fn pair_combo(c: &Combo, psi: &TestFunction, eps: f64) -> Result<PairingResult> {
    let mut value = 0.0;
    let mut err = 0.0;
    for (coeff, p) in &c.terms {
        let r = pair(p, psi, eps)?;
        value += coeff * r.value;
        err += coeff.abs() * r.err;
    }
    Ok(PairingResult { epsilon: eps, value, err })
}

/// Writes `epsilon,value,err` rows.
pub fn write_csv(rows: &[PairingResult], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "epsilon,value,err")?;
    for r in rows {
        writeln!(out, "{:e},{:e},{:e}", r.epsilon, r.value, r.err)?;
    }
    Ok(())
}

/// Distributions with closed-form actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    DeltaP(u32),
    XNegPower(u32),
    Nu(Sign, f64),
    Zero,
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distribution::DeltaP(p) => write!(f, "delta^({p})"),
            Distribution::XNegPower(n) => write!(f, "x^(-{n})"),
            Distribution::Nu(Sign::Plus, a) => write!(f, "nu+^({a})"),
            Distribution::Nu(Sign::Minus, a) => write!(f, "nu-^({a})"),
            Distribution::Zero => write!(f, "0"),
        }
    }
}

fn log_rules(degree: usize) -> (GaussRule, GaussRule) {
    let n = degree / 2 + 4;
    (gauss_legendre(n), gauss_log(n))
}

/// Smallest r ≥ 0 with a + r > −1.
fn integrable_order(a: f64) -> u32 {
    if a > -1.0 {
        0
    } else {
        (-1.0 - a).floor() as u32 + 1
    }
}

/// ⟨u, ψ⟩ for the catalog distributions.
pub fn action(dist: &Distribution, psi: &TestFunction) -> Result<f64> {
    match *dist {
        Distribution::Zero => Ok(0.0),
        Distribution::DeltaP(p) => Ok(rat_to_f64(&action_delta_exact(p, psi))),
        Distribution::XNegPower(n) => {
            check_psi_order(n, psi)?;
            let (leg, lg) = log_rules(psi.degree());
            let big = psi.radius();
            let val = integrate_log_endpoint(&leg, &lg, big, |x| psi.eval_derivative(n, x) + psi.eval_derivative(n, -x));
            Ok(-val / factorial(n - 1))
        }
        Distribution::Nu(sign, a) => {
            let r = integrable_order(a);
            check_psi_order(r, psi)?;
            let g = a + f64::from(r);
            let norm = 1.0 / gamma(g + 1.0)?;
            let big = psi.radius();
            let rule = gauss_jacobi(psi.degree() / 2 + 4, 0.0, g)?;
            // ∫_0^L x^g f(x) dx with x = L(1+t)/2
            let scale = (0.5 * big).powf(g + 1.0);
            let (sr, dir) = match sign {
                Sign::Plus => (if r.is_multiple_of(2) { 1.0 } else { -1.0 }, 1.0),
                Sign::Minus => (1.0, -1.0),
            };
            let val = rule.apply(|t| {
                let x = 0.5 * big * (1.0 + t);
                psi.eval_derivative(r, dir * x)
            });
            Ok(sr * norm * scale * val)
        }
    }
}

/// (−1)^p ψ^{(p)}(0) exactly.
pub fn action_delta_exact(p: u32, psi: &TestFunction) -> Rational {
    let v = psi.derivative_at_zero(p);
    if p.is_multiple_of(2) {
        v
    } else {
        -v
    }
}

fn check_psi_order(n: u32, psi: &TestFunction) -> Result<()> {
    if n > psi.smoothness() {
        return Err(Error::config(format!(
            "derivative order {n} exceeds test-function smoothness {}",
            psi.smoothness()
        )));
    }
    Ok(())
}

/// Natural magnitude of ⟨u, ψ⟩ used as the denominator of relative errors
/// when the action itself vanishes (the action of the absolute kernel).
pub fn action_scale(dist: &Distribution, psi: &TestFunction) -> Result<f64> {
    let opts = AdaptiveOptions { abs_tol: 1e-14, rel_tol: 1e-8, ..Default::default() };
    let big = psi.radius();
    match *dist {
        Distribution::Zero => Ok(0.0),
        Distribution::DeltaP(p) => Ok((0..=p).map(|k| psi.derivative_at_zero_f64(k).abs()).fold(0.0, f64::max)),
        Distribution::XNegPower(n) => {
            check_psi_order(n, psi)?;
            let v = integrate_adaptive(
                |x| x.abs().ln().abs() * psi.eval_derivative(n, x).abs(),
                &[-big, -1.0f64.min(big), 0.0, 1.0f64.min(big), big],
                opts,
            )?;
            Ok(v.value / factorial(n - 1))
        }
        Distribution::Nu(sign, a) => {
            let r = integrable_order(a);
            check_psi_order(r, psi)?;
            let g = a + f64::from(r);
            let dir = if sign == Sign::Plus { 1.0 } else { -1.0 };
            let v = integrate_adaptive(|x| x.powf(g) * psi.eval_derivative(r, dir * x).abs(), &[0.0, big], opts)?;
            Ok(v.value / gamma(g + 1.0)?.abs())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::NuParams;
    use crate::mollifier::{build_mollifier, MollifierSpec};
    use crate::poly::rat;

    fn moll(seed: u64) -> Arc<Mollifier> {
        Arc::new(build_mollifier(2, 10, 1.0, seed).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn test_function_examples() {
        let psi = TestFunction::new(1.0, 4, vec![rat(1, 1)]).unwrap();
        assert_eq!(psi.derivative_at_zero(0), rat(1, 1));
        assert_eq!(psi.derivative_at_zero(1), rat(0, 1));
        assert_eq!(psi.derivative_at_zero(2), rat(-8, 1));
        assert_eq!(psi.eval(1.0), 0.0);
        let psi = TestFunction::new(1.0, 4, vec![rat(1, 1), rat(1, 1)]).unwrap();
        assert_eq!(psi.derivative_at_zero(1), rat(1, 1));
        assert!(TestFunction::new(1.0, 1, vec![rat(1, 1)]).is_err());
        assert!(TestFunction::new(0.0, 4, vec![rat(1, 1)]).is_err());
    }

    #[test]
    fn default_set_shapes() {
        let set = default_test_functions();
        assert!(set[0].derivative_at_zero(1).is_zero());
        assert!(set[0].derivative_at_zero(3).is_zero());
        for n in 0..=8 {
            assert!(!set[1].derivative_at_zero(n).is_zero(), "generic psi has vanishing derivative {n}");
        }
        assert!(set[2].derivative_at_zero(0).is_zero());
        assert!(!set[2].derivative_at_zero(1).is_zero());
        let spec = set[1].to_spec();
        let back = TestFunction::from_spec(&spec).unwrap();
        assert_eq!(back.poly(), set[1].poly());
        assert_eq!(back.name(), "generic");
    }

    #[test]
    fn delta_pairings() {
        let m = moll(1);
        let psi = &default_test_functions()[1];
        let d0 = Product::from(Rep::delta(0, &m).unwrap());
        // ∫ δ̃ dx = 1: pair against a test function that is 1 on the support
        let flat = TestFunction::new(100.0, 2, vec![rat(1, 1)]).unwrap();
        let v = pair(&d0, &flat, 0.01).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let v = pair(&d0, psi, 1e-4).unwrap().value;
        assert!(rel(v, psi.eval(0.0)) < 1e-8);
        let d1 = Product::from(Rep::delta(1, &m).unwrap());
        let v = pair(&d1, psi, 1e-4).unwrap().value;
        assert!(rel(v, -psi.derivative_at_zero_f64(1)) < 1e-7);
    }

    #[test]
    fn symmetric_delta_error_is_quadratic() {
        let m = Arc::new(Mollifier::build(&MollifierSpec::new(1, 6, 1.0, 0).unwrap().with_extra(0)).unwrap());
        let psi = &default_test_functions()[1];
        let d0 = Product::from(Rep::delta(0, &m).unwrap());
        let e1 = pair(&d0, psi, 0.02).unwrap().value - psi.eval(0.0);
        let e2 = pair(&d0, psi, 0.01).unwrap().value - psi.eval(0.0);
        assert!((e1 / e2 - 4.0).abs() < 0.05, "{}", e1 / e2);
    }

    #[test]
    fn delta_square_leading_terms() {
        let m = moll(2);
        let l2 = rat_to_f64(&m.l2_norm_sq());
        let d = Rep::delta(0, &m).unwrap();
        let dd = Product::new(d.clone(), [d.clone()]).unwrap();
        let dd1 = Product::new(d, [Rep::delta(1, &m).unwrap()]).unwrap();
        for psi in &default_test_functions() {
            let eps = 1e-6;
            let v = eps * pair(&dd, psi, eps).unwrap().value;
            let want = psi.eval(0.0) * l2;
            assert!((v - want).abs() < 1e-5 * want.abs().max(l2), "{v} {want}");
            let v = eps * pair(&dd1, psi, eps).unwrap().value;
            let want = -psi.derivative_at_zero_f64(1) * l2 / 2.0;
            assert!((v - want).abs() < 1e-5 * want.abs().max(l2), "{v} {want}");
        }
        // pointwise: δ̃·δ̃ at x = 0 is ε^{−2} φ(0)²
        let phi0 = m.eval_derivative(0, 0.0).unwrap();
        assert!(rel(dd.eval(0.1, 0.0).unwrap(), 100.0 * phi0 * phi0) < 1e-13);
    }

    #[test]
    fn products_and_zero() {
        let m = moll(3);
        let p = NuParams::with_default_order(0.4).unwrap();
        let f = Product::new(Rep::nu(Sign::Plus, p, &m).unwrap(), [Rep::nu(Sign::Minus, p, &m).unwrap()]).unwrap();
        assert_eq!(f.eval(0.1, 0.1).unwrap(), 0.0);
        assert_eq!(f.eval(0.1, -0.2).unwrap(), 0.0);
        assert!(f.eval(0.1, 0.05).unwrap() != 0.0);
        let z = multiply(&f, &Product::from(Rep::zero(&m))).unwrap();
        assert_eq!(z.eval(0.1, 0.05).unwrap(), 0.0);
        assert_eq!(pair(&z, &default_test_functions()[0], 0.1).unwrap().value, 0.0);
        let other = moll(4);
        assert!(multiply(&f, &Product::from(Rep::delta(0, &other).unwrap())).is_err());
    }

    /// The Jacobi path agrees with brute-force adaptive integration in x.
    #[test]
    fn compact_path_matches_adaptive() {
        let m = moll(5);
        let psi = &default_test_functions()[1];
        for (a, b) in [(0.5, -2.5), (-0.3, -2.7), (1.3, -0.9)] {
            let f = Product::new(
                Rep::nu(Sign::Plus, NuParams::with_default_order(a).unwrap(), &m).unwrap(),
                [Rep::nu(Sign::Minus, NuParams::with_default_order(b).unwrap(), &m).unwrap()],
            )
            .unwrap();
            for eps in [0.1, 0.01] {
                let fast = pair(&f, psi, eps).unwrap();
                let slow = pair_with(&f, psi, eps, PairOptions { refine: 1, ..Default::default() }).unwrap();
                assert!(fast.is_reliable());
                assert!((fast.value - slow.value).abs() < 1e-9 * slow.value.abs().max(1.0), "{fast:?} {slow:?}");
            }
        }
    }

    #[test]
    fn linearity() {
        let m = moll(6);
        let psi = &default_test_functions()[2];
        let f = Product::from(Rep::delta(1, &m).unwrap());
        let g = Product::from(Rep::nu(Sign::Plus, NuParams::with_default_order(0.5).unwrap(), &m).unwrap());
        let c = Combo::new().term(2.0, f.clone()).term(-3.0, g.clone());
        let eps = 0.05;
        let lhs = pair_combo(&c, psi, eps).unwrap().value;
        let rhs = 2.0 * pair(&f, psi, eps).unwrap().value - 3.0 * pair(&g, psi, eps).unwrap().value;
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn refinement_is_stable() {
        let m = moll(7);
        let psi = &default_test_functions()[1];
        let f = Product::new(Rep::x_neg_power(1, &m).unwrap(), [Rep::x_neg_power(1, &m).unwrap()]).unwrap();
        let a = pair(&f, psi, 0.01).unwrap();
        let b = pair_with(&f, psi, 0.01, PairOptions { refine: 1, ..Default::default() }).unwrap();
        assert!(rel(a.value, b.value) < 1e-9);
    }

    #[test]
    fn nu_pairing_tends_to_action() {
        let m = moll(8);
        for psi in &default_test_functions() {
            for (sign, a) in [(Sign::Plus, 0.5), (Sign::Minus, -0.5), (Sign::Plus, -1.5), (Sign::Minus, 1.7)] {
                let f = Product::from(Rep::nu(sign, NuParams::with_default_order(a).unwrap(), &m).unwrap());
                let want = action(&Distribution::Nu(sign, a), psi).unwrap();
                let scale = action_scale(&Distribution::Nu(sign, a), psi).unwrap();
                let got = pair(&f, psi, 1e-4).unwrap().value;
                assert!((got - want).abs() < 1e-6 * want.abs().max(scale), "a={a} {got} {want}");
            }
        }
    }

    #[test]
    fn log_pairing_tends_to_integral() {
        let m = moll(9);
        let psi = &default_test_functions()[1];
        let opts = AdaptiveOptions { rel_tol: 1e-12, ..Default::default() };
        let want = integrate_adaptive(|x| x.abs().ln() * psi.eval(x), &[-2.0, 0.0, 2.0], opts).unwrap().value;
        let f = Product::from(Rep::log_abs(&m));
        let got = pair(&f, psi, 1e-4).unwrap().value;
        assert!(rel(got, want) < 1e-7, "{got} {want}");
    }

    #[test]
    fn reciprocal_pairings() {
        let m = moll(10);
        let f = Product::from(Rep::x_neg_power(1, &m).unwrap());
        // odd kernel against an even test function
        let even = &default_test_functions()[0];
        assert!(pair(&f, even, 1e-3).unwrap().value.abs() < 1e-9);
        // principal value ∫ ψ/x = ∫_0^L (ψ(x) − ψ(−x))/x dx
        let psi = &default_test_functions()[1];
        let opts = AdaptiveOptions { rel_tol: 1e-12, ..Default::default() };
        let pv = integrate_adaptive(|x| (psi.eval(x) - psi.eval(-x)) / x, &[0.0, 2.0], opts).unwrap().value;
        let got = pair(&f, psi, 1e-5).unwrap().value;
        assert!(rel(got, pv) < 1e-6, "{got} {pv}");
        assert!(rel(action(&Distribution::XNegPower(1), psi).unwrap(), pv) < 1e-10);
    }

    #[test]
    fn negative_power_actions() {
        let psi = TestFunction::new(1.0, 4, vec![rat(1, 1)]).unwrap();
        // brute-force finite part: lim_h [∫_{|x|>h} ψ/x² − 2ψ(0)/h], Richardson in h
        let opts = AdaptiveOptions { rel_tol: 1e-13, ..Default::default() };
        let bf = |h: f64| {
            integrate_adaptive(|x| (psi.eval(x) + psi.eval(-x)) / (x * x), &[h, 2.0 * h, 1.0], opts).unwrap().value
                - 2.0 * psi.eval(0.0) / h
        };
        let h = 1e-3;
        let (b1, b2, b4) = (bf(h), bf(h / 2.0), bf(h / 4.0));
        let r1 = 2.0 * b2 - b1;
        let r2 = 2.0 * b4 - b2;
        let brute = (4.0 * r2 - r1) / 3.0;
        let got = action(&Distribution::XNegPower(2), &psi).unwrap();
        assert!((got - brute).abs() < 1e-6, "{got} {brute}");
        assert!(action(&Distribution::XNegPower(1), &psi).unwrap().abs() < 1e-14);
        let lin = TestFunction::new(1.0, 4, vec![rat(1, 1), rat(1, 1)]).unwrap();
        assert_eq!(action(&Distribution::DeltaP(1), &lin).unwrap(), -1.0);
        assert_eq!(action(&Distribution::Zero, &psi).unwrap(), 0.0);
        assert!(action(&Distribution::XNegPower(5), &psi).is_err());
    }

    #[test]
    fn negative_power_pairing_tends_to_action() {
        let m = moll(11);
        let psi = &default_test_functions()[1];
        let f = Product::from(Rep::x_neg_power(2, &m).unwrap());
        let want = action(&Distribution::XNegPower(2), psi).unwrap();
        let got = pair(&f, psi, 1e-4).unwrap().value;
        assert!(rel(got, want) < 1e-6, "{got} {want}");
    }

    #[test]
    fn csv_layout() {
        let rows = [PairingResult { epsilon: 0.1, value: -2.5, err: 1e-15 }];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epsilon,value,err\n1e-1,-2.5e0,1e-15\n");
    }
}
