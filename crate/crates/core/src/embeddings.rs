//! Representatives f(φ_ε, x) = (u ∗ φ̌_ε)(x) of the distributions used in the
//! product identities.
//!
//! Every representative has the form ε^κ·h(x/ε) for a fixed profile h (the
//! logarithm adds ln ε instead), so all numerical work happens on profiles in
//! the scaled variable w = x/ε.
//!
//! | kind          | profile h(w)                                                   | κ      |
//! |---------------|----------------------------------------------------------------|--------|
//! | δ^(p)         | (−1)^p φ^(p)(−w)                                               | −p−1   |
//! | ν₊^a (order r)| (−1)^r/Γ(a+r+1) ∫_{max(−l,−w)}^{l} (w+u)^{a+r} φ^(r)(u) du     | a      |
//! | ν₋^a (order r)| 1/Γ(a+r+1) ∫_{−l}^{min(l,−w)} (−w−v)^{a+r} φ^(r)(v) dv         | a      |
//! | x₊^a, x₋^a    | Γ(a+1) × the ν profile                                         | a      |
//! | ln abs x      | ∫ ln abs(w+v) φ(v) dv, plus ln ε                               | —      |
//! | x^(−p)        | −1/(p−1)! ∫ ln abs(w+v) φ^(p)(v) dv                            | −p     |
//!
//! Inside the support strip the ν integrals are taken in the variable
//! s = distance to the branch point, where the weight s^{a+r} is handled by a
//! Gauss–Jacobi rule and the rest is a polynomial, so the rule is exact up to
//! rounding. Far from the strip a Gauss–Legendre rule on [−l, l] is used with
//! the smallest reduction order that keeps the kernel integrable.

use crate::error::{Error, Result};
use crate::mollifier::Mollifier;
use crate::quadrature::{gauss_jacobi, gauss_legendre, gauss_log, integrate_log_endpoint, GaussRule};
use crate::special::{factorial, gamma, near_pole};
use std::sync::Arc;

/// Points closer than this multiple of l to the strip use the strip formulas.
const FAR_FACTOR: f64 = 1.1;
const MIN_RULE: usize = 40;
const FAR_RULE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

/// Exponent a and reduction order r of a normed power ν_±^a = ∂^r ν_±^{a+r}
/// (up to the sign of the derivative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuParams {
    a: f64,
    r: u32,
}

/// Default reduction order: one more than ceil(max(a+1, −a−1)), raised if
/// needed so that a + r ≥ 1.
pub fn default_order(a: f64) -> u32 {
    let base = (a + 1.0).max(-a - 1.0).ceil() + 1.0;
    let need = (1.0 - a).ceil();
    base.max(need).max(0.0) as u32
}

impl NuParams {
    pub fn new(a: f64, r: u32) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::config(format!("exponent must be finite, got {a}")));
        }
        if a < 0.0 && near_pole(a) {
            return Err(Error::config(format!("exponent {a} is a negative integer")));
        }
        if a + f64::from(r) < 1.0 {
            return Err(Error::config(format!("reduction order {r} too small for a = {a}: need a + r >= 1")));
        }
        Ok(Self { a, r })
    }

    pub fn with_default_order(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::config(format!("exponent must be finite, got {a}")));
        }
        Self::new(a, default_order(a))
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn r(&self) -> u32 {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    DeltaP(u32),
    NuPlus(NuParams),
    NuMinus(NuParams),
    XPlusA(NuParams),
    XMinusA(NuParams),
    LogAbs,
    XNegPower(u32),
    Zero,
}

/// Support of a profile in the scaled variable w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Empty,
    Interval { lo: Option<f64>, hi: Option<f64> },
}

impl Support {
    pub fn intersect(self, other: Support) -> Support {
        match (self, other) {
            (Support::Interval { lo: a0, hi: a1 }, Support::Interval { lo: b0, hi: b1 }) => {
                let lo = match (a0, b0) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, None) | (None, x) => x,
                };
                let hi = match (a1, b1) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, None) | (None, x) => x,
                };
                match (lo, hi) {
                    (Some(x), Some(y)) if x >= y => Support::Empty,
                    _ => Support::Interval { lo, hi },
                }
            }
            _ => Support::Empty,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Support::Empty => true,
            Support::Interval { lo, hi } => lo.is_some() && hi.is_some(),
        }
    }
}

#[derive(Debug, Clone)]
struct PowerData {
    sign: Sign,
    /// a + r
    gamma: f64,
    r: i32,
    /// constant in front of the strip integral, including (−1)^r for ν₊
    norm: f64,
    /// ∫_0^1 t^{a+r} f(t) dt
    jacobi: GaussRule,
    far_r: i32,
    far_norm: f64,
}

#[derive(Debug, Clone)]
struct LogData {
    /// derivative order carried by φ (0 for ln abs x)
    p: i32,
    norm: f64,
    legendre: GaussRule,
    log: GaussRule,
}

#[derive(Debug, Clone)]
enum Data {
    None,
    Power(PowerData),
    Log(LogData),
}

/// Evaluable representative of one distribution built on a shared mollifier.
#[derive(Debug, Clone)]
pub struct Rep {
    kind: Kind,
    mollifier: Arc<Mollifier>,
    data: Data,
    far: Arc<GaussRule>,
    note: String,
}

fn rule_size(degree: usize) -> usize {
    (degree / 2 + 2).max(MIN_RULE)
}

/// Jacobi rule for ∫_0^1 t^γ f(t) dt.
fn unit_jacobi(n: usize, gamma_exp: f64) -> Result<GaussRule> {
    let rule = gauss_jacobi(n, 0.0, gamma_exp)?;
    let scale = 0.5f64.powf(gamma_exp + 1.0);
    Ok(GaussRule {
        nodes: rule.nodes.iter().map(|x| 0.5 * (1.0 + x)).collect(),
        weights: rule.weights.iter().map(|w| w * scale).collect(),
    })
}

fn signed(r: i32) -> f64 {
    if r % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Rep {
    fn base(kind: Kind, m: &Arc<Mollifier>, data: Data, note: String) -> Self {
        Self { kind, mollifier: Arc::clone(m), data, far: Arc::new(gauss_legendre(FAR_RULE)), note }
    }

    pub fn zero(m: &Arc<Mollifier>) -> Self {
        Self::base(Kind::Zero, m, Data::None, "zero".into())
    }

    pub fn delta(p: u32, m: &Arc<Mollifier>) -> Result<Self> {
        m.check_order(p as i32)?;
        Ok(Self::base(Kind::DeltaP(p), m, Data::None, format!("delta derivative of order {p}")))
    }

    pub fn nu(sign: Sign, params: NuParams, m: &Arc<Mollifier>) -> Result<Self> {
        let kind = match sign {
            Sign::Plus => Kind::NuPlus(params),
            Sign::Minus => Kind::NuMinus(params),
        };
        Self::power(kind, sign, params, 1.0, m)
    }

    /// x_±^a = Γ(a+1)·ν_±^a.
    pub fn x_pm(sign: Sign, params: NuParams, m: &Arc<Mollifier>) -> Result<Self> {
        let kind = match sign {
            Sign::Plus => Kind::XPlusA(params),
            Sign::Minus => Kind::XMinusA(params),
        };
        let g = gamma(params.a + 1.0)?;
        Self::power(kind, sign, params, g, m)
    }

    fn power(kind: Kind, sign: Sign, params: NuParams, factor: f64, m: &Arc<Mollifier>) -> Result<Self> {
        let r = params.r as i32;
        m.check_order(r)?;
        let a = params.a;
        let gamma_exp = a + f64::from(params.r);
        let far_r = if a > -1.0 { 0 } else { (-1.0 - a).floor() as i32 + 1 };
        let (sr, sfar) = match sign {
            Sign::Plus => (signed(r), signed(far_r)),
            Sign::Minus => (1.0, 1.0),
        };
        let norm = factor * sr / gamma(gamma_exp + 1.0)?;
        let far_norm = factor * sfar / gamma(a + f64::from(far_r) + 1.0)?;
        let jacobi = unit_jacobi(rule_size(m.degree()), gamma_exp)?;
        let note = format!("reduction order r = {r}; a + r = {gamma_exp}");
        let data = PowerData { sign, gamma: gamma_exp, r, norm, jacobi, far_r, far_norm };
        Ok(Self::base(kind, m, Data::Power(data), note))
    }

    pub fn log_abs(m: &Arc<Mollifier>) -> Self {
        let n = rule_size(m.degree());
        let data = LogData { p: 0, norm: 1.0, legendre: gauss_legendre(n), log: gauss_log(n) };
        Self::base(Kind::LogAbs, m, Data::Log(data), "log of the absolute value".into())
    }

    /// Finite-part power x^{−p}, built as (−1)^{p−1}/(p−1)! times the p-th
    /// derivative of the ln abs x representative.
    pub fn x_neg_power(p: u32, m: &Arc<Mollifier>) -> Result<Self> {
        if p == 0 {
            return Err(Error::config("negative power must be at least 1"));
        }
        m.check_order(p as i32)?;
        let n = rule_size(m.degree());
        let data = LogData { p: p as i32, norm: -1.0 / factorial(p - 1), legendre: gauss_legendre(n), log: gauss_log(n) };
        Ok(Self::base(Kind::XNegPower(p), m, Data::Log(data), format!("finite part, order {p}")))
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn mollifier(&self) -> &Arc<Mollifier> {
        &self.mollifier
    }

    /// Reduction order or derivative order carried by φ.
    pub fn order(&self) -> Option<u32> {
        match self.kind {
            Kind::DeltaP(p) | Kind::XNegPower(p) => Some(p),
            Kind::NuPlus(n) | Kind::NuMinus(n) | Kind::XPlusA(n) | Kind::XMinusA(n) => Some(n.r),
            Kind::LogAbs | Kind::Zero => None,
        }
    }

    pub fn note(&self) -> &str {
        &self.note
    }

    /// κ in value = ε^κ·h(x/ε); `None` for the logarithm.
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::DeltaP(p) => Some(-(f64::from(p)) - 1.0),
            Kind::NuPlus(n) | Kind::NuMinus(n) | Kind::XPlusA(n) | Kind::XMinusA(n) => Some(n.a),
            Kind::XNegPower(p) => Some(-f64::from(p)),
            Kind::Zero => Some(0.0),
            Kind::LogAbs => None,
        }
    }

    pub fn support(&self) -> Support {
        let l = self.mollifier.l();
        match self.kind {
            Kind::DeltaP(_) => Support::Interval { lo: Some(-l), hi: Some(l) },
            Kind::NuPlus(_) | Kind::XPlusA(_) => Support::Interval { lo: Some(-l), hi: None },
            Kind::NuMinus(_) | Kind::XMinusA(_) => Support::Interval { lo: None, hi: Some(l) },
            Kind::LogAbs | Kind::XNegPower(_) => Support::Interval { lo: None, hi: None },
            Kind::Zero => Support::Empty,
        }
    }

    /// Whether the profile on [−l, l] is (1+w/l)^β (1−w/l)^α times a
    /// polynomial, see [`Rep::endpoint_exponents`].
    pub fn is_algebraic(&self) -> bool {
        !matches!(self.kind, Kind::LogAbs | Kind::XNegPower(_))
    }

    /// (β, α): exponents of (1 + w/l) and (1 − w/l) split off by
    /// [`Rep::profile_regular`].
    pub fn endpoint_exponents(&self) -> (f64, f64) {
        match (&self.kind, &self.data) {
            (Kind::NuPlus(_) | Kind::XPlusA(_), Data::Power(d)) => (d.gamma + 1.0, 0.0),
            (Kind::NuMinus(_) | Kind::XMinusA(_), Data::Power(d)) => (0.0, d.gamma + 1.0),
            _ => (0.0, 0.0),
        }
    }

    /// Degree of the polynomial factor of the profile on [−l, l] (algebraic
    /// kinds only).
    pub fn poly_degree(&self) -> usize {
        let deg = self.mollifier.degree();
        match (&self.kind, &self.data) {
            (Kind::DeltaP(p), _) => deg.saturating_sub(*p as usize),
            (_, Data::Power(d)) => deg.saturating_sub(d.r as usize),
            _ => 0,
        }
    }

    /// Profile divided by its endpoint factors, for −l < w < l.
    pub fn profile_regular(&self, w: f64) -> f64 {
        let m = &*self.mollifier;
        let l = m.l();
        match (&self.kind, &self.data) {
            (Kind::DeltaP(p), _) => signed(*p as i32) * m.extended(*p as i32, -w),
            (_, Data::Power(d)) => {
                let lp = l.powf(d.gamma + 1.0);
                match d.sign {
                    Sign::Plus => d.norm * lp * strip_sum(d, m, w + l, |t| t - w),
                    Sign::Minus => d.norm * lp * strip_sum(d, m, l - w, |t| -w - t),
                }
            }
            (Kind::Zero, _) => 0.0,
            _ => self.profile(w),
        }
    }

    /// h(w); see the module table.
    pub fn profile(&self, w: f64) -> f64 {
        let m = &*self.mollifier;
        let l = m.l();
        match (&self.kind, &self.data) {
            (Kind::Zero, _) => 0.0,
            (Kind::DeltaP(p), _) => {
                if w.abs() >= l {
                    0.0
                } else {
                    signed(*p as i32) * m.extended(*p as i32, -w)
                }
            }
            (_, Data::Power(d)) => power_profile(d, m, &self.far, w),
            (_, Data::Log(d)) => log_profile(d, m, &self.far, w),
            _ => unreachable!("representative data matches its kind"),
        }
    }

    /// Representative value at (ε, x).
    pub fn eval(&self, eps: f64, x: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::config(format!("eps must be positive, got {eps}")));
        }
        let h = self.profile(x / eps);
        Ok(match self.exponent() {
            Some(0.0) => h,
            Some(k) => eps.powf(k) * h,
            None => eps.ln() + h,
        })
    }
}

/// Σ_i W_i φ^{(r)}(arg(A t_i)) for the t^{a+r} Jacobi rule, times A^{a+r+1}
/// omitted.
fn strip_sum(d: &PowerData, m: &Mollifier, extent: f64, arg: impl Fn(f64) -> f64) -> f64 {
    d.jacobi.apply(|t| m.extended(d.r, arg(extent * t)))
}

fn power_profile(d: &PowerData, m: &Mollifier, far: &GaussRule, w: f64) -> f64 {
    let l = m.l();
    // mirror ν₋ onto ν₊: the integral of ν₋ at w uses φ^{(r)}(−w−s) where ν₊
    // uses φ^{(r)}(s−w), so only the argument map and the side differ
    let (z, dir) = match d.sign {
        Sign::Plus => (w, 1.0),
        Sign::Minus => (-w, -1.0),
    };
    // z is the distance-like coordinate: zero profile for z ≤ −l
    if z <= -l {
        return 0.0;
    }
    let g1 = d.gamma + 1.0;
    let strip = |extent: f64| -> f64 {
        // plus: φ(s − w) with s = extent·t; minus: φ(−w − s)
        extent.powf(g1) * strip_sum(d, m, extent, |s| dir * (s - z))
    };
    if z < l {
        d.norm * strip(z + l)
    } else if z < FAR_FACTOR * l {
        d.norm * (strip(z + l) - strip(z - l))
    } else {
        let pow = d.gamma - f64::from(d.r - d.far_r);
        d.far_norm * far.integrate(-l, l, |u| (z + u).powf(pow) * m.extended(d.far_r, dir * u))
    }
}

fn log_profile(d: &LogData, m: &Mollifier, far: &GaussRule, w: f64) -> f64 {
    let l = m.l();
    if w.abs() >= FAR_FACTOR * l {
        // classical kernels: ∫ φ(v) (w+v)^{−p} dv or ∫ ln|w+v| φ(v) dv
        return if d.p == 0 {
            far.integrate(-l, l, |v| (w + v).abs().ln() * m.extended(0, v))
        } else {
            let p = d.p;
            far.integrate(-l, l, |v| m.extended(0, v) * (w + v).powi(-p))
        };
    }
    // ∫_{w−l}^{w+l} ln|s| Q(s) ds with Q(s) = φ^{(p)}(s − w), split at s = 0
    let q_pos = |s: f64| m.extended(d.p, s - w);
    let q_neg = |s: f64| m.extended(d.p, -s - w);
    let lo = w - l;
    let hi = w + l;
    let int = |extent: f64, neg: bool| {
        if neg {
            integrate_log_endpoint(&d.legendre, &d.log, extent, q_neg)
        } else {
            integrate_log_endpoint(&d.legendre, &d.log, extent, q_pos)
        }
    };
    let value = if lo < 0.0 && hi > 0.0 {
        int(hi, false) + int(-lo, true)
    } else if lo >= 0.0 {
        int(hi, false) - int(lo, false)
    } else {
        int(-lo, true) - int(-hi, true)
    };
    d.norm * value
}
