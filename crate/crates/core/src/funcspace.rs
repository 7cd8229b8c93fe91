//! Entire functions on ℂⁿ and their Fock–Sobolev norms.
//!
//! The integral norm is
//! `‖f‖_{(p,m)} = (C_{p,m,n} ∫ |z|^{mp} |f(z)|^p e^{−αp|z|²/2} dV)^{1/p}` with
//! `C_{p,m,n} = (αp/2)^{mp/2+n} Γ(n) / (πⁿ Γ(mp/2+n))`, normalized so that the
//! constant function has norm one; at `p = ∞` it is `sup |z|^m |f(z)| e^{−α|z|²/2}`.
//! The derivative norm sums ordinary Fock norms of all partials of order ≤ m.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::error::{FockError, Result};
use crate::geometry::Point;
use crate::quadrature::{
    integrate_gaussian, sup_field_norm, truncation_radius, Envelope, QuadratureScheme, ScalarField,
    Symmetry,
};

/// Largest real exponent passed to `exp` before evaluation reports overflow.
pub const EXP_CAP: f64 = 709.0;

/// A Lebesgue exponent in `(0, ∞]`. Serialized as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// Ordering with `∞` on top.
    pub fn le(self, other: Exponent) -> bool {
        match (self, other) {
            (_, Exponent::Infinite) => true,
            (Exponent::Infinite, Exponent::Finite(_)) => false,
            (Exponent::Finite(a), Exponent::Finite(b)) => a <= b,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(p) => Ok(Exponent::Finite(p)),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "∞") => {
                Ok(Exponent::Infinite)
            }
            Repr::Text(t) => Err(de::Error::custom(format!(
                "expected a number or \"inf\", found {t:?}"
            ))),
        }
    }
}

/// Ambient configuration: dimension, weight, Sobolev order, and exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: usize,
    pub alpha: f64,
    pub m: u32,
    pub p: Exponent,
    pub q: Exponent,
}

impl Params {
    pub fn new(n: usize, alpha: f64, m: u32, p: Exponent, q: Exponent) -> Result<Self> {
        let params = Params { n, alpha, m, p, q };
        params.validate()?;
        Ok(params)
    }

    /// Shorthand for finite exponents.
    pub fn finite(n: usize, alpha: f64, m: u32, p: f64, q: f64) -> Result<Self> {
        Params::new(n, alpha, m, Exponent::Finite(p), Exponent::Finite(q))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(FockError::invalid("n", "dimension must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(FockError::invalid("alpha", "must be positive and finite"));
        }
        for (name, e) in [("p", self.p), ("q", self.q)] {
            if let Exponent::Finite(v) = e {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(FockError::invalid(name, "must be positive or \"inf\""));
                }
            }
        }
        Ok(())
    }

    pub fn with_m(&self, m: u32) -> Params {
        Params { m, ..self.clone() }
    }

    pub fn with_p(&self, p: Exponent) -> Params {
        Params { p, ..self.clone() }
    }

    /// The same space with the target exponent as the source exponent.
    pub fn target(&self) -> Params {
        Params {
            p: self.q,
            ..self.clone()
        }
    }
}

/// `C_{p,m,n}`, the constant making `‖1‖_{(p,m)} = 1`.
pub fn norm_constant(alpha: f64, p: f64, m: u32, n: usize) -> f64 {
    let a = m as f64 * p / 2.0 + n as f64;
    (a * (alpha * p / 2.0).ln() + ln_gamma(n as f64) - n as f64 * PI.ln() - ln_gamma(a)).exp()
}

pub type MultiIndex = Vec<u32>;

/// A polynomial in `z_1, …, z_n` with complex coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    n: usize,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

impl Polynomial {
    pub fn new(n: usize, terms: impl IntoIterator<Item = (MultiIndex, Complex64)>) -> Result<Self> {
        if n == 0 {
            return Err(FockError::invalid("n", "dimension must be at least 1"));
        }
        let mut coeffs = BTreeMap::new();
        for (beta, c) in terms {
            if beta.len() != n {
                return Err(FockError::DimensionMismatch {
                    expected: n,
                    found: beta.len(),
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(FockError::invalid("coeffs", "coefficients must be finite"));
            }
            *coeffs.entry(beta).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c: &mut Complex64| *c != Complex64::new(0.0, 0.0));
        Ok(Polynomial { n, coeffs })
    }

    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        Polynomial::new(n, [(vec![0; n], c)]).expect("well-formed constant")
    }

    pub fn monomial(beta: MultiIndex) -> Self {
        let n = beta.len();
        Polynomial::new(n, [(beta, Complex64::new(1.0, 0.0))]).expect("well-formed monomial")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Complex64> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|b| b.iter().sum()).max().unwrap_or(0)
    }

    /// The constant value, when the polynomial has degree 0.
    pub fn as_constant(&self) -> Option<Complex64> {
        match self.coeffs.len() {
            0 => Some(Complex64::new(0.0, 0.0)),
            1 => self
                .coeffs
                .iter()
                .next()
                .filter(|(b, _)| b.iter().all(|&k| k == 0))
                .map(|(_, c)| *c),
            _ => None,
        }
    }

    pub fn eval(&self, z: &Point) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(beta, c)| {
                beta.iter()
                    .zip(z.coords())
                    .fold(*c, |acc, (&k, zj)| acc * zj.powu(k))
            })
            .sum()
    }

    /// `∂^β f`, by exact coefficient shifts.
    pub fn derivative(&self, beta: &[u32]) -> Polynomial {
        let mut out = BTreeMap::new();
        for (gamma, c) in &self.coeffs {
            if gamma.iter().zip(beta).any(|(g, b)| g < b) {
                continue;
            }
            let mut factor = 1.0;
            let mut shifted = gamma.clone();
            for (g, &b) in shifted.iter_mut().zip(beta) {
                for k in 0..b {
                    factor *= (*g - k) as f64;
                }
                *g -= b;
            }
            *out.entry(shifted).or_insert(Complex64::new(0.0, 0.0)) += c * factor;
        }
        out.retain(|_, c: &mut Complex64| *c != Complex64::new(0.0, 0.0));
        Polynomial {
            n: self.n,
            coeffs: out,
        }
    }

    /// Drops the homogeneous components of total degree below `j`.
    pub fn tail_projection(&self, j: u32) -> Polynomial {
        Polynomial {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(b, _)| b.iter().sum::<u32>() >= j)
                .map(|(b, c)| (b.clone(), *c))
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Polynomial {
        Polynomial::new(self.n, self.coeffs.iter().map(|(b, c)| (b.clone(), c * s)))
            .expect("scaling keeps the polynomial well formed")
    }
}

/// One term `coeff·K_w`, optionally normalized to `k_w` and Sobolev-scaled to `ξ_{(w,m)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub center: Point,
    pub coeff: Complex64,
    pub normalized: bool,
    pub sobolev_scaled: bool,
}

impl KernelTerm {
    /// Complex exponent `ln coeff + α⟨z, w⟩ − [α|w|²/2] − [m ln(1+|w|)]`.
    fn exponent(&self, z: &Point, alpha: f64, m: u32) -> Complex64 {
        let mut e = z.inner(&self.center) * alpha + self.coeff.ln();
        if self.normalized {
            e -= alpha * self.center.norm_sqr() / 2.0;
        }
        if self.sobolev_scaled && m > 0 {
            e -= m as f64 * self.center.norm().ln_1p();
        }
        e
    }
}

/// The entire functions the library can evaluate and norm.
#[derive(Clone, Debug, PartialEq)]
pub enum EntireFunction {
    Polynomial(Polynomial),
    KernelCombo(Vec<KernelTerm>),
}

impl EntireFunction {
    pub fn constant(n: usize, c: f64) -> Self {
        EntireFunction::Polynomial(Polynomial::constant(n, Complex64::new(c, 0.0)))
    }

    pub fn monomial(beta: MultiIndex) -> Self {
        EntireFunction::Polynomial(Polynomial::monomial(beta))
    }

    /// `K_w(z) = e^{α⟨z,w⟩}`.
    pub fn kernel(w: Point) -> Self {
        EntireFunction::kernel_term(w, Complex64::new(1.0, 0.0), false, false)
    }

    /// `k_w = K_w e^{−α|w|²/2}`.
    pub fn normalized_kernel(w: Point) -> Self {
        EntireFunction::kernel_term(w, Complex64::new(1.0, 0.0), true, false)
    }

    /// `ξ_{(w,m)} = (1+|w|)^{−m} k_w`.
    pub fn sobolev_kernel(w: Point) -> Self {
        EntireFunction::kernel_term(w, Complex64::new(1.0, 0.0), true, true)
    }

    pub fn kernel_term(w: Point, coeff: Complex64, normalized: bool, sobolev_scaled: bool) -> Self {
        EntireFunction::KernelCombo(vec![KernelTerm {
            center: w,
            coeff,
            normalized,
            sobolev_scaled,
        }])
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            EntireFunction::Polynomial(p) => Some(p.dim()),
            EntireFunction::KernelCombo(terms) => terms.first().map(|t| t.center.dim()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            EntireFunction::Polynomial(p) => p.is_zero(),
            EntireFunction::KernelCombo(terms) => {
                terms.iter().all(|t| t.coeff == Complex64::new(0.0, 0.0))
            }
        }
    }

    /// `|f|` is constant: zero, a constant polynomial, or a single kernel with `w = 0`.
    pub fn constant_modulus(&self) -> bool {
        match self {
            EntireFunction::Polynomial(p) => p.as_constant().is_some(),
            EntireFunction::KernelCombo(terms) => {
                self.is_zero() || (terms.len() == 1 && terms[0].center.norm_sqr() == 0.0)
            }
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            EntireFunction::Polynomial(p) if p.dim() != n => Err(FockError::DimensionMismatch {
                expected: n,
                found: p.dim(),
            }),
            EntireFunction::KernelCombo(terms) => {
                terms.iter().try_for_each(|t| t.center.check_dim(n))
            }
            _ => Ok(()),
        }
    }

    /// `f(z)`; kernel exponents are assembled before a single exponential.
    pub fn eval(&self, z: &Point, params: &Params) -> Result<Complex64> {
        z.check_dim(params.n)?;
        match self {
            EntireFunction::Polynomial(p) => Ok(p.eval(z)),
            EntireFunction::KernelCombo(terms) => {
                let exps: Vec<Complex64> = terms
                    .iter()
                    .filter(|t| t.coeff != Complex64::new(0.0, 0.0))
                    .map(|t| t.exponent(z, params.alpha, params.m))
                    .collect();
                let top = exps.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
                if top > EXP_CAP {
                    return Err(FockError::Overflow {
                        exponent: top,
                        cap: EXP_CAP,
                    });
                }
                Ok(exps.iter().map(|e| e.exp()).sum())
            }
        }
    }

    /// `ln |f(z)|` (−∞ at zeros), stable for kernels with large exponents.
    pub fn log_modulus(&self, z: &Point, alpha: f64, m: u32) -> f64 {
        match self {
            EntireFunction::Polynomial(p) => p.eval(z).norm().ln(),
            EntireFunction::KernelCombo(terms) => {
                let exps: Vec<Complex64> = terms
                    .iter()
                    .filter(|t| t.coeff != Complex64::new(0.0, 0.0))
                    .map(|t| t.exponent(z, alpha, m))
                    .collect();
                let top = exps.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
                if top == f64::NEG_INFINITY {
                    return top;
                }
                let sum: Complex64 = exps.iter().map(|e| (e - top).exp()).sum();
                sum.norm().ln() + top
            }
        }
    }

    /// Where `|f(z)| e^{−α|z|²/2}` concentrates, and how fast it grows polynomially.
    pub fn profile(&self) -> FunctionProfile {
        match self {
            EntireFunction::Polynomial(p) => {
                let n = p.dim();
                let single_monomial = p.terms().len() <= 1;
                FunctionProfile {
                    center: Point::origin(n),
                    core_radius: 0.0,
                    degree: p.degree() as f64,
                    radial: single_monomial && (n == 1 || p.degree() == 0),
                }
            }
            EntireFunction::KernelCombo(terms) => {
                let live: Vec<&KernelTerm> = terms
                    .iter()
                    .filter(|t| t.coeff != Complex64::new(0.0, 0.0))
                    .collect();
                match live.as_slice() {
                    [] => FunctionProfile {
                        center: terms.first().map_or(Point::origin(1), |t| Point::origin(t.center.dim())),
                        core_radius: 0.0,
                        degree: 0.0,
                        radial: true,
                    },
                    [single] => FunctionProfile {
                        center: single.center.clone(),
                        core_radius: 0.0,
                        degree: 0.0,
                        radial: true,
                    },
                    many => FunctionProfile {
                        center: Point::origin(many[0].center.dim()),
                        core_radius: many.iter().map(|t| t.center.norm()).fold(0.0, f64::max),
                        degree: 0.0,
                        radial: false,
                    },
                }
            }
        }
    }
}

/// Shape metadata of `z ↦ |f(z)| e^{−α|z|²/2}`: a Gaussian of rate α/2 around
/// `center` (past a core ball), times polynomial growth of the given degree.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionProfile {
    pub center: Point,
    pub core_radius: f64,
    pub degree: f64,
    /// `|f|` depends only on `|z − center|`.
    pub radial: bool,
}

/// Which polynomial weight multiplies `|f|` in the integral norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SobolevWeight {
    /// `|z|^m`, the norm proper.
    Modulus,
    /// `(1+|z|)^m`, the comparable variant.
    Shifted,
}

type LogModulus = dyn Fn(&Point) -> f64 + Send + Sync;

/// Anything whose Fock–Sobolev norm can be taken: a log-modulus evaluator plus its profile.
#[derive(Clone)]
pub struct NormTarget {
    log_modulus: Arc<LogModulus>,
    profile: FunctionProfile,
    dim: usize,
}

impl NormTarget {
    pub fn new(
        dim: usize,
        profile: FunctionProfile,
        log_modulus: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        NormTarget {
            log_modulus: Arc::new(log_modulus),
            profile,
            dim,
        }
    }

    pub fn from_function(f: &EntireFunction, params: &Params) -> Result<Self> {
        f.check_dim(params.n)?;
        let g = f.clone();
        let (alpha, m) = (params.alpha, params.m);
        Ok(NormTarget::new(params.n, f.profile(), move |z| {
            g.log_modulus(z, alpha, m)
        }))
    }

    pub fn log_modulus(&self, z: &Point) -> f64 {
        (self.log_modulus)(z)
    }

    pub fn profile(&self) -> &FunctionProfile {
        &self.profile
    }

    /// `z ↦ w(z)^p |f(z)|^p e^{−αp|z|²/2}` with `w` the Sobolev weight; `p = ∞` is the unpowered maximand.
    pub fn weighted_field(&self, params: &Params, p: Exponent, weight: SobolevWeight) -> Result<ScalarField> {
        let power = p.finite().unwrap_or(1.0);
        let (alpha, m) = (params.alpha, params.m as f64);
        let logf = self.log_modulus.clone();
        let prof = &self.profile;
        let radial = prof.radial && (m == 0.0 || prof.center.norm_sqr() == 0.0);
        let symmetry = if radial {
            Symmetry::Radial
        } else {
            Symmetry::General
        };
        let envelope = Envelope::gaussian(
            prof.center.clone(),
            alpha * power / 2.0,
            power * (prof.degree + m),
        )
        .with_core(prof.core_radius);
        ScalarField::new(self.dim, envelope, symmetry, move |z| {
            let r2 = z.norm_sqr();
            let mut log = logf(z);
            if m > 0.0 {
                log += match weight {
                    SobolevWeight::Modulus => m * r2.sqrt().ln(),
                    SobolevWeight::Shifted => m * r2.sqrt().ln_1p(),
                };
            }
            log -= alpha * r2 / 2.0;
            (power * log).exp()
        })
    }

    /// Search radius for sup norms: the maximand is negligible beyond it.
    fn search_radius(&self, params: &Params, scheme: &QuadratureScheme) -> Result<f64> {
        let prof = &self.profile;
        let tail = truncation_radius(
            params.alpha / 2.0,
            params.m as f64 + prof.degree,
            scheme.tail_tolerance,
            params.n,
        )?;
        Ok(prof.center.norm() + prof.core_radius + tail)
    }

    pub fn norm(&self, params: &Params, scheme: &QuadratureScheme) -> Result<f64> {
        self.norm_with_weight(params, scheme, SobolevWeight::Modulus)
    }

    pub fn norm_with_weight(
        &self,
        params: &Params,
        scheme: &QuadratureScheme,
        weight: SobolevWeight,
    ) -> Result<f64> {
        let field = self.weighted_field(params, params.p, weight)?;
        match params.p {
            Exponent::Finite(p) => {
                let integral = integrate_gaussian(&field, scheme)?;
                let c = norm_constant(params.alpha, p, params.m, params.n);
                let value = (c * integral.value).powf(1.0 / p);
                if !value.is_finite() {
                    return Err(FockError::Divergent(format!("norm evaluated to {value}")));
                }
                Ok(value)
            }
            Exponent::Infinite => {
                let radius = self.search_radius(params, scheme)?;
                let step = radius / if params.n == 1 { 128.0 } else { 24.0 };
                Ok(sup_field_norm(&field, radius, step)?.value)
            }
        }
    }
}

/// `‖f‖_{(p,m)}` in integral form, with `p = params.p`.
pub fn fock_sobolev_norm(f: &EntireFunction, params: &Params, scheme: &QuadratureScheme) -> Result<f64> {
    params.validate()?;
    NormTarget::from_function(f, params)?.norm(params, scheme)
}

/// The integral-form norm with `(1+|z|)^m` in place of `|z|^m`.
pub fn shifted_weight_norm(f: &EntireFunction, params: &Params, scheme: &QuadratureScheme) -> Result<f64> {
    params.validate()?;
    NormTarget::from_function(f, params)?.norm_with_weight(params, scheme, SobolevWeight::Shifted)
}

/// `Σ_{|β| ≤ m} ‖∂^β f‖_p`, each term an ordinary (m = 0) Fock norm.
pub fn derivative_norm(f: &EntireFunction, params: &Params, scheme: &QuadratureScheme) -> Result<f64> {
    params.validate()?;
    let EntireFunction::Polynomial(poly) = f else {
        return Err(FockError::Unsupported(
            "derivative norms are only available for polynomials".into(),
        ));
    };
    f.check_dim(params.n)?;
    let base = params.with_m(0);
    let mut total = 0.0;
    for beta in multi_indices(params.n, params.m) {
        let d = poly.derivative(&beta);
        if d.is_zero() {
            continue;
        }
        total += fock_sobolev_norm(&EntireFunction::Polynomial(d), &base, scheme)?;
    }
    Ok(total)
}

/// All multi-indices of length `n` with total degree ≤ `max_degree`, in lexicographic order.
pub fn multi_indices(n: usize, max_degree: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, budget: u32, prefix: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k);
            rec(n, budget - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_degree, &mut Vec::with_capacity(n), &mut out);
    out
}

/// `R_j f`: the homogeneous components of degree ≥ j.
pub fn tail_projection(f: &EntireFunction, j: u32) -> Result<EntireFunction> {
    match f {
        EntireFunction::Polynomial(p) => Ok(EntireFunction::Polynomial(p.tail_projection(j))),
        EntireFunction::KernelCombo(_) => Err(FockError::Unsupported(
            "tail projections are only available for polynomials".into(),
        )),
    }
}

/// `max_z |f(z)| (1+|z|)^m e^{−α|z|²/2} / ‖f‖_{(p,m)}` over the samples.
pub fn pointwise_bound_ratio(
    f: &EntireFunction,
    params: &Params,
    norm: f64,
    samples: &[Point],
) -> Result<f64> {
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(FockError::ZeroNorm);
    }
    let m = params.m as f64;
    let mut best: f64 = 0.0;
    for z in samples {
        z.check_dim(params.n)?;
        let log = f.log_modulus(z, params.alpha, params.m) + m * z.norm().ln_1p()
            - params.alpha * z.norm_sqr() / 2.0;
        best = best.max(log.exp() / norm);
    }
    Ok(best)
}

/// Serialized form of a function, as read from scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionRecord {
    /// `coeffs`: rows `[β_1, …, β_n, re, im]`.
    Poly { coeffs: Vec<Vec<f64>> },
    Kernel {
        center: Vec<f64>,
        #[serde(default = "default_true")]
        normalized: bool,
        #[serde(default)]
        m_scaled: bool,
        #[serde(default = "default_coeff")]
        coeff: [f64; 2],
    },
    KernelCombo { terms: Vec<KernelRecord> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRecord {
    pub center: Vec<f64>,
    #[serde(default = "default_true")]
    pub normalized: bool,
    #[serde(default)]
    pub m_scaled: bool,
    #[serde(default = "default_coeff")]
    pub coeff: [f64; 2],
}

fn default_true() -> bool {
    true
}

fn default_coeff() -> [f64; 2] {
    [1.0, 0.0]
}

impl KernelRecord {
    fn to_term(&self, n: usize) -> Result<KernelTerm> {
        let center = Point::from_reals(&self.center)?;
        center.check_dim(n)?;
        let coeff = Complex64::new(self.coeff[0], self.coeff[1]);
        if !(coeff.re.is_finite() && coeff.im.is_finite()) {
            return Err(FockError::invalid("coeff", "must be finite"));
        }
        Ok(KernelTerm {
            center,
            coeff,
            normalized: self.normalized,
            sobolev_scaled: self.m_scaled,
        })
    }
}

impl FunctionRecord {
    pub fn to_function(&self, n: usize) -> Result<EntireFunction> {
        match self {
            FunctionRecord::Poly { coeffs } => {
                let mut terms = Vec::with_capacity(coeffs.len());
                for row in coeffs {
                    if row.len() != n + 2 {
                        return Err(FockError::invalid(
                            "coeffs",
                            format!("each row needs {n} exponents followed by re, im"),
                        ));
                    }
                    let mut beta = Vec::with_capacity(n);
                    for &b in &row[..n] {
                        if b < 0.0 || b.fract() != 0.0 || b > u32::MAX as f64 {
                            return Err(FockError::invalid(
                                "coeffs",
                                "exponents must be nonnegative integers",
                            ));
                        }
                        beta.push(b as u32);
                    }
                    terms.push((beta, Complex64::new(row[n], row[n + 1])));
                }
                Ok(EntireFunction::Polynomial(Polynomial::new(n, terms)?))
            }
            FunctionRecord::Kernel {
                center,
                normalized,
                m_scaled,
                coeff,
            } => {
                let rec = KernelRecord {
                    center: center.clone(),
                    normalized: *normalized,
                    m_scaled: *m_scaled,
                    coeff: *coeff,
                };
                Ok(EntireFunction::KernelCombo(vec![rec.to_term(n)?]))
            }
            FunctionRecord::KernelCombo { terms } => Ok(EntireFunction::KernelCombo(
                terms.iter().map(|t| t.to_term(n)).collect::<Result<_>>()?,
            )),
        }
    }

    pub fn from_function(f: &EntireFunction) -> FunctionRecord {
        match f {
            EntireFunction::Polynomial(p) => FunctionRecord::Poly {
                coeffs: p
                    .terms()
                    .iter()
                    .map(|(b, c)| {
                        b.iter()
                            .map(|&k| k as f64)
                            .chain([c.re, c.im])
                            .collect()
                    })
                    .collect(),
            },
            EntireFunction::KernelCombo(terms) => FunctionRecord::KernelCombo {
                terms: terms
                    .iter()
                    .map(|t| KernelRecord {
                        center: t.center.reals(),
                        normalized: t.normalized,
                        m_scaled: t.sobolev_scaled,
                        coeff: [t.coeff.re, t.coeff.im],
                    })
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(m: u32, p: f64) -> Params {
        Params::finite(1, 1.0, m, p, p).unwrap()
    }

    #[test]
    fn kernel_diagonal_values() {
        let w = Point::scalar(c(0.6, 0.8));
        let p = params(0, 2.0);
        let big = EntireFunction::kernel(w.clone()).eval(&w, &p).unwrap();
        assert_relative_eq!(big.re, E, max_relative = 1e-14);
        assert!(big.im.abs() < 1e-14);
        let small = EntireFunction::normalized_kernel(w.clone()).eval(&w, &p).unwrap();
        assert_relative_eq!(small.re, 0.5f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn polynomial_evaluation() {
        let f = EntireFunction::monomial(vec![2]);
        let v = f.eval(&Point::scalar(c(2.0, 0.0)), &params(0, 2.0)).unwrap();
        assert_eq!(v, c(4.0, 0.0));
    }

    #[test]
    fn kernel_overflow_is_reported() {
        let w = Point::scalar(c(30.0, 0.0));
        let err = EntireFunction::kernel(w.clone()).eval(&w, &params(0, 2.0));
        assert!(matches!(err, Err(FockError::Overflow { .. })));
    }

    #[test]
    fn norm_constant_normalizes_the_constant_function() {
        let scheme = QuadratureScheme::default();
        for m in 0..=2 {
            for p in [1.0, 2.0, 4.0] {
                let v = fock_sobolev_norm(&EntireFunction::constant(1, 1.0), &params(m, p), &scheme).unwrap();
                assert_relative_eq!(v, 1.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn normalized_kernel_has_unit_norm() {
        let scheme = QuadratureScheme::default();
        let f = EntireFunction::normalized_kernel(Point::scalar(c(1.2, -1.4)));
        let v = fock_sobolev_norm(&f, &params(0, 2.0), &scheme).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn derivative_norm_examples() {
        let scheme = QuadratureScheme::default();
        let one = EntireFunction::constant(1, 1.0);
        assert_relative_eq!(derivative_norm(&one, &params(0, 2.0), &scheme).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(derivative_norm(&one, &params(1, 2.0), &scheme).unwrap(), 1.0, max_relative = 1e-9);
        let z = EntireFunction::monomial(vec![1]);
        assert_relative_eq!(derivative_norm(&z, &params(1, 2.0), &scheme).unwrap(), 2.0, max_relative = 1e-5);
        let k = EntireFunction::normalized_kernel(Point::origin(1));
        assert!(derivative_norm(&k, &params(1, 2.0), &scheme).is_err());
    }

    #[test]
    fn derivative_shifts_coefficients() {
        let p = Polynomial::new(2, [(vec![2, 1], c(3.0, 0.0)), (vec![0, 1], c(1.0, 0.0))]).unwrap();
        let d = p.derivative(&[1, 1]);
        assert_eq!(d, Polynomial::new(2, [(vec![1, 0], c(6.0, 0.0))]).unwrap());
        assert!(p.derivative(&[3, 0]).is_zero());
    }

    #[test]
    fn tail_projection_examples() {
        let f = EntireFunction::Polynomial(
            Polynomial::new(1, [(vec![0], c(1.0, 0.0)), (vec![1], c(1.0, 0.0)), (vec![2], c(1.0, 0.0))]).unwrap(),
        );
        assert_eq!(tail_projection(&f, 0).unwrap(), f);
        assert_eq!(tail_projection(&f, 2).unwrap(), EntireFunction::monomial(vec![2]));
        assert!(tail_projection(&f, 5).unwrap().is_zero());
    }

    #[test]
    fn pointwise_ratio_examples() {
        let w = Point::scalar(c(1.0, 1.0));
        let k = EntireFunction::normalized_kernel(w.clone());
        let r = pointwise_bound_ratio(&k, &params(0, 2.0), 1.0, &[w]).unwrap();
        assert_relative_eq!(r, 1.0, max_relative = 1e-14);

        let one = EntireFunction::constant(1, 1.0);
        let r = pointwise_bound_ratio(&one, &params(0, 2.0), 1.0, &[Point::origin(1)]).unwrap();
        assert_eq!(r, 1.0);

        // d/dt [(1+t)² e^{−t²/2}] = (1+t)(2 − t − t²) e^{−t²/2} vanishes at t = 1.
        let t: f64 = 1.0;
        let samples: Vec<Point> = (0..=4000).map(|i| Point::scalar(c(i as f64 * 1e-3, 0.0))).collect();
        let r = pointwise_bound_ratio(&one, &params(2, 2.0), 1.0, &samples).unwrap();
        assert_relative_eq!(r, (1.0 + t).powi(2) * (-t * t / 2.0).exp(), max_relative = 1e-6);
        assert!(r > 1.0);
    }

    #[test]
    fn exponent_serde() {
        let p: Params = serde_json::from_str(r#"{"n":1,"alpha":1.0,"m":0,"p":"inf","q":2}"#).unwrap();
        assert_eq!(p.p, Exponent::Infinite);
        assert_eq!(p.q, Exponent::Finite(2.0));
        assert!(serde_json::from_str::<Params>(r#"{"n":1,"alpha":1.0,"m":0,"p":2,"q":2,"r":1}"#).is_err());
        assert!(Params::finite(1, 1.0, 0, -1.0, 2.0).is_err());
    }

    #[test]
    fn function_records_round_trip() {
        let rec: FunctionRecord =
            serde_json::from_str(r#"{"kind":"poly","coeffs":[[2,1.0,0.0],[0,0.5,-1.0]]}"#).unwrap();
        let f = rec.to_function(1).unwrap();
        let back = FunctionRecord::from_function(&f).to_function(1).unwrap();
        assert_eq!(f, back);
        let rec: FunctionRecord = serde_json::from_str(
            r#"{"kind":"kernel","center":[1.0,0.0],"normalized":true,"m_scaled":false,"coeff":[1.0,0.0]}"#,
        )
        .unwrap();
        assert_eq!(
            rec.to_function(1).unwrap(),
            EntireFunction::normalized_kernel(Point::scalar(c(1.0, 0.0)))
        );
    }
}
