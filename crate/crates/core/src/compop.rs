//! Weighted composition operators `uC_ψ f = u·(f∘ψ)` between Fock–Sobolev spaces.
//!
//! Boundedness and compactness are read off two transforms of the symbol pair:
//! - `B(w) = ∫ |k_w(ψ(z))|^q (1+|ψ(z)|)^{−mq} |u(z)|^q |z|^{mq} e^{−αq|z|²/2} dV(z)` for finite `q`;
//! - `B^∞(z) = |z|^m |u(z)| (1+|ψ(z)|)^{−m} e^{α(|ψ(z)|²−|z|²)/2}` for `q = ∞`.
//!
//! A direct probe over a finite test family gives an independent lower bound on
//! the operator norm, and the pull-back measure reduces the question to a
//! Carleson embedding.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleson::FamilySpec;
use crate::divergence::{probe, ScaledValue, SCALES};
use crate::error::{FockError, Result};
use crate::funcspace::{
    norm_constant, EntireFunction, Exponent, FunctionProfile, FunctionRecord, NormTarget, Params,
    Polynomial, SobolevWeight, EXP_CAP,
};
use crate::geometry::{make_lattice, shell_grid, Point};
use crate::measures::{Atom, Measure, MeasureFamily};
use crate::quadrature::{
    integrate_gaussian, integrate_truncated, Envelope, QuadratureScheme, ScalarField, Symmetry,
};

/// Default tolerance for detecting singular values equal to one.
pub const SINGULAR_TOLERANCE: f64 = 1e-8;

/// Probe ratios above this count as evidence of unboundedness.
pub const PROBE_CAP: f64 = 1e3;

/// Compactness threshold relative to the transform's peak.
pub const DECAY_THRESHOLD: f64 = 1e-3;

/// `ψ(z) = Az + B`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    n: usize,
    /// Row-major `n×n`.
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl AffineMap {
    pub fn new(a: Vec<Vec<Complex64>>, b: Vec<Complex64>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(FockError::invalid("B", "dimension must be at least 1"));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(FockError::invalid("A", format!("must be a {n}×{n} matrix")));
        }
        let a: Vec<Complex64> = a.into_iter().flatten().collect();
        if a.iter().chain(&b).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(FockError::invalid("A", "entries must be finite"));
        }
        Ok(AffineMap { n, a, b })
    }

    /// `z ↦ az + b` on ℂ.
    pub fn scalar(a: Complex64, b: Complex64) -> Self {
        AffineMap {
            n: 1,
            a: vec![a],
            b: vec![b],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = Complex64::new(1.0, 0.0);
        }
        AffineMap {
            n,
            a,
            b: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    pub fn translation(&self) -> &[Complex64] {
        &self.b
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n, self.n, &self.a)
    }

    fn is_identity(&self) -> bool {
        *self == AffineMap::identity(self.n)
    }

    fn has_translation(&self) -> bool {
        self.b.iter().any(|c| c.norm_sqr() != 0.0)
    }

    pub fn apply(&self, z: &Point) -> Point {
        if self.is_identity() {
            return z.clone();
        }
        let coords = (0..self.n)
            .map(|i| {
                (0..self.n).fold(self.b[i], |acc, j| acc + self.entry(i, j) * z.coords()[j])
            })
            .collect();
        Point::from_coords_unchecked(coords)
    }

    /// `A* w`.
    pub fn adjoint_apply(&self, w: &Point) -> Point {
        let coords = (0..self.n)
            .map(|j| {
                (0..self.n).fold(Complex64::new(0.0, 0.0), |acc, i| {
                    acc + self.entry(i, j).conj() * w.coords()[i]
                })
            })
            .collect();
        Point::from_coords_unchecked(coords)
    }

    /// `√(‖A‖₁‖A‖_∞)`, an upper bound on the operator norm that is exact for
    /// diagonal unitaries.
    fn norm_bound(&self) -> f64 {
        let col = (0..self.n)
            .map(|j| (0..self.n).map(|i| self.entry(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let row = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max);
        (col * row).sqrt()
    }

    fn is_unitary(&self, tol: f64) -> bool {
        let m = self.matrix();
        let product = m.adjoint() * &m;
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                let target = if i == j { 1.0 } else { 0.0 };
                (product[(i, j)] - Complex64::new(target, 0.0)).norm() <= tol
            })
        })
    }
}

/// The map `ψ`: affine, or a polynomial in each coordinate.
#[derive(Clone, Debug, PartialEq)]
pub enum Symbol {
    Affine(AffineMap),
    Polynomial(Vec<Polynomial>),
}

impl Symbol {
    pub fn dim(&self) -> usize {
        match self {
            Symbol::Affine(map) => map.dim(),
            Symbol::Polynomial(coords) => coords.len(),
        }
    }

    pub fn apply(&self, z: &Point) -> Point {
        match self {
            Symbol::Affine(map) => map.apply(z),
            Symbol::Polynomial(coords) => {
                Point::from_coords_unchecked(coords.iter().map(|p| p.eval(z)).collect())
            }
        }
    }

    /// Non-affine symbols are accepted but fall outside the affine characterization.
    pub fn is_affine(&self) -> bool {
        match self {
            Symbol::Affine(_) => true,
            Symbol::Polynomial(coords) => coords.iter().all(|p| p.degree() <= 1),
        }
    }

    fn degree(&self) -> u32 {
        match self {
            Symbol::Affine(_) => 1,
            Symbol::Polynomial(coords) => coords.iter().map(|p| p.degree()).max().unwrap_or(0),
        }
    }
}

/// The multiplier `u` and the symbol `ψ` of `uC_ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolPair {
    pub u: EntireFunction,
    pub psi: Symbol,
}

impl SymbolPair {
    pub fn new(u: EntireFunction, psi: Symbol) -> Result<Self> {
        let n = psi.dim();
        if n == 0 {
            return Err(FockError::invalid("psi", "dimension must be at least 1"));
        }
        if let Symbol::Polynomial(coords) = &psi {
            for p in coords {
                if p.dim() != n {
                    return Err(FockError::DimensionMismatch {
                        expected: n,
                        found: p.dim(),
                    });
                }
            }
        }
        u.check_dim(n)?;
        Ok(SymbolPair { u, psi })
    }

    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    fn check(&self, params: &Params) -> Result<()> {
        params.validate()?;
        if self.dim() != params.n {
            return Err(FockError::DimensionMismatch {
                expected: params.n,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// `|u|` is `e^{α Re⟨z, c⟩}` up to a constant: a constant or a single kernel.
fn gaussian_type(u: &EntireFunction) -> bool {
    if u.constant_modulus() {
        return true;
    }
    match u {
        EntireFunction::KernelCombo(terms) => {
            terms
                .iter()
                .filter(|t| t.coeff != Complex64::new(0.0, 0.0))
                .count()
                == 1
        }
        EntireFunction::Polynomial(_) => false,
    }
}

fn finite_q(params: &Params) -> Result<f64> {
    params
        .q
        .finite()
        .ok_or_else(|| FockError::invalid("q", "this transform needs a finite target exponent"))
}

/// The integrand of `B(w)` as a field of `z`.
fn transform_field(sym: &SymbolPair, params: &Params, w: &Point) -> Result<ScalarField> {
    let q = finite_q(params)?;
    let (alpha, m) = (params.alpha, params.m);
    let n = params.n;
    let u_profile = sym.u.profile();
    let (center, core, symmetry) = match &sym.psi {
        Symbol::Affine(map) => {
            let radial = m == 0 && gaussian_type(&sym.u);
            (
                map.adjoint_apply(w).add(&u_profile.center),
                u_profile.core_radius,
                if radial {
                    Symmetry::Radial
                } else {
                    Symmetry::General
                },
            )
        }
        Symbol::Polynomial(_) => (
            Point::origin(n),
            u_profile.core_radius + u_profile.center.norm(),
            Symmetry::General,
        ),
    };
    let envelope = Envelope::gaussian(
        center,
        alpha * q / 2.0,
        q * (u_profile.degree + m as f64),
    )
    .with_core(core);
    let sym = sym.clone();
    let w = w.clone();
    let shift = w.norm_sqr() / 2.0;
    ScalarField::new(n, envelope, symmetry, move |z| {
        let pz = sym.psi.apply(z);
        let mut log = alpha * (pz.inner(&w).re - shift - z.norm_sqr() / 2.0)
            + sym.u.log_modulus(z, alpha, m);
        if m > 0 {
            log += m as f64 * (z.norm().ln() - pz.norm().ln_1p());
        }
        (q * log).exp()
    })
}

/// `B(w)` with exponent `q`; `+∞` when the integral diverges.
pub fn berezin_compop(
    sym: &SymbolPair,
    params: &Params,
    w: &Point,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    sym.check(params)?;
    w.check_dim(params.n)?;
    finite_q(params)?;
    scheme.validate()?;
    if sym.u.is_zero() {
        return Ok(0.0);
    }
    let field = transform_field(sym, params, w)?;
    let value = if sym.psi.is_affine() {
        integrate_gaussian(&field, scheme).map(|i| i.value)
    } else {
        let half = scheme.half_width(field.envelope(), params.n)?;
        probe(|s| Ok(integrate_truncated(&field, half * s, scheme)?.value))
            .map(|scaled| if scaled.divergent { f64::INFINITY } else { scaled.value() })
    };
    match value {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(FockError::Divergent(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn sup_transform_log(sym: &SymbolPair, params: &Params, z: &Point) -> (f64, f64) {
    let (alpha, m) = (params.alpha, params.m as f64);
    let pz = sym.psi.apply(z);
    let psi_sqr = pz.norm_sqr();
    let mut log = sym.u.log_modulus(z, alpha, params.m) + alpha * (psi_sqr - z.norm_sqr()) / 2.0;
    if m > 0.0 {
        log += m * (z.norm().ln() - psi_sqr.sqrt().ln_1p());
    }
    (log, psi_sqr.sqrt())
}

/// `B^∞(z)`.
pub fn sup_transform(sym: &SymbolPair, params: &Params, z: &Point) -> Result<f64> {
    sym.check(params)?;
    z.check_dim(params.n)?;
    let (log, _) = sup_transform_log(sym, params, z);
    if log > EXP_CAP {
        return Err(FockError::Overflow {
            exponent: log,
            cap: EXP_CAP,
        });
    }
    Ok(log.exp())
}

/// Atoms at `ψ(z_i)` for the cell centers `z_i` of a cube grid of half-width
/// `grid_radius`, weighted by `|u|^q |z|^{mq} e^{qα(|ψ(z)|²−|z|²)/2}` times the cell volume.
pub fn pullback_measure(
    sym: &SymbolPair,
    params: &Params,
    grid_radius: f64,
    grid_step: f64,
) -> Result<Measure> {
    sym.check(params)?;
    let q = finite_q(params)?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(FockError::invalid("grid_step", "must be positive"));
    }
    if !(grid_radius > 0.0 && grid_radius.is_finite()) {
        return Err(FockError::invalid("grid_radius", "must be positive"));
    }
    let n = params.n;
    if sym.u.is_zero() {
        return Ok(Measure::empty(n));
    }
    let dims = 2 * n;
    let per_axis = ((2.0 * grid_radius / grid_step).round() as usize).max(1);
    let step = 2.0 * grid_radius / per_axis as f64;
    let total = per_axis
        .checked_pow(dims as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| FockError::invalid("grid_step", "pull-back grid too fine"))?;
    let volume = step.powi(dims as i32);
    let atoms: Vec<Option<Atom>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut reals = vec![0.0; dims];
            for x in reals.iter_mut().rev() {
                *x = -grid_radius + ((rest % per_axis) as f64 + 0.5) * step;
                rest /= per_axis;
            }
            let z = Point::from_reals_unchecked(&reals);
            let (log, _) = sup_transform_log(sym, params, &z);
            let weight = ((q * log).exp() * volume).min(f64::MAX);
            (weight > 0.0).then(|| Atom {
                location: sym.psi.apply(&z),
                weight,
            })
        })
        .collect();
    let atoms: Vec<Atom> = atoms
        .into_iter()
        .flatten()
        .filter(|a| a.location.coords().iter().all(|c| c.re.is_finite() && c.im.is_finite()))
        .collect();
    Measure::atomic(n, atoms)
}

/// Pull-back measures on growing grids, for the Carleson classifier's scale test.
#[derive(Clone, Debug)]
pub struct PullbackFamily {
    pub symbol: SymbolPair,
    pub params: Params,
    pub grid_radius: f64,
    pub grid_step: f64,
}

impl MeasureFamily for PullbackFamily {
    fn dim(&self) -> usize {
        self.params.n
    }

    fn at_scale(&self, factor: f64) -> Result<Measure> {
        pullback_measure(&self.symbol, &self.params, self.grid_radius * factor, self.grid_step)
    }
}

/// Largest grid radius `G ≤ max_radius` (on a `step` grid) with `|ψ| ≤ image_cap`
/// over the cube of half-width `1.5G`, so all three scales stay representable.
pub fn pullback_grid_radius(sym: &SymbolPair, max_radius: f64, image_cap: f64, step: f64) -> f64 {
    let dims = 2 * sym.dim();
    let samples = 17usize;
    let fits = |g: f64| {
        let reach = 1.5 * g;
        let total = samples.pow(dims as u32);
        (0..total).all(|flat| {
            let mut rest = flat;
            let reals: Vec<f64> = (0..dims)
                .map(|_| {
                    let i = rest % samples;
                    rest /= samples;
                    -reach + 2.0 * reach * i as f64 / (samples - 1) as f64
                })
                .collect();
            sym.psi.apply(&Point::from_reals_unchecked(&reals)).norm() <= image_cap
        })
    };
    let mut g = (max_radius / step).floor() * step;
    while g > step && !fits(g) {
        g -= step;
    }
    g.max(step)
}

/// Result of probing `‖uC_ψ f‖_{(q,m)} / ‖f‖_{(p,m)}` over a test family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectNorm {
    /// Largest ratio seen; `+∞` when a composed norm diverged.
    pub value: f64,
    pub exceeded_cap: bool,
    /// Members evaluated before stopping.
    pub probes: usize,
}

/// `z ↦ u(z) f(ψ(z))` as a norm target.
fn composite_target(sym: &SymbolPair, f: &EntireFunction, params: &Params) -> NormTarget {
    let fp = f.profile();
    let up = sym.u.profile();
    let n = params.n;
    let profile = match &sym.psi {
        Symbol::Affine(map) => {
            let shape_preserving =
                !map.has_translation() && map.is_unitary(1e-12) && fp.radial;
            let radial = shape_preserving
                && (sym.u.constant_modulus() || (gaussian_type(&sym.u) && fp.degree == 0.0));
            FunctionProfile {
                center: map.adjoint_apply(&fp.center).add(&up.center),
                core_radius: map.norm_bound() * fp.core_radius + up.core_radius,
                degree: fp.degree + up.degree,
                radial,
            }
        }
        Symbol::Polynomial(_) => FunctionProfile {
            center: Point::origin(n),
            core_radius: up.core_radius + up.center.norm(),
            degree: fp.degree * sym.psi.degree() as f64 + up.degree,
            radial: false,
        },
    };
    let (alpha, m) = (params.alpha, params.m);
    let (u, psi, f) = (sym.u.clone(), sym.psi.clone(), f.clone());
    NormTarget::new(n, profile, move |z| {
        u.log_modulus(z, alpha, m) + f.log_modulus(&psi.apply(z), alpha, m)
    })
}

/// `‖uC_ψ f‖_{(q,m)}`; non-affine symbols are checked for divergence across truncations.
fn composite_norm(
    sym: &SymbolPair,
    f: &EntireFunction,
    params: &Params,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let target_params = params.target();
    let target = composite_target(sym, f, params);
    match (sym.psi.is_affine(), target_params.p) {
        (false, Exponent::Finite(q)) => {
            let field = target.weighted_field(&target_params, target_params.p, SobolevWeight::Modulus)?;
            let half = scheme.half_width(field.envelope(), params.n)?;
            let scaled = match probe(|s| Ok(integrate_truncated(&field, half * s, scheme)?.value)) {
                Ok(scaled) => scaled,
                Err(FockError::Divergent(_)) => return Ok(f64::INFINITY),
                Err(e) => return Err(e),
            };
            if scaled.divergent {
                return Ok(f64::INFINITY);
            }
            let c = norm_constant(params.alpha, q, params.m, params.n);
            Ok((c * scaled.value()).powf(1.0 / q))
        }
        _ => target.norm(&target_params, scheme),
    }
}

/// Largest `‖uC_ψ f‖_{(q,m)} / ‖f‖_{(p,m)}` over the family; stops at the first
/// ratio above [`PROBE_CAP`].
pub fn direct_operator_norm(
    sym: &SymbolPair,
    params: &Params,
    family: &FamilySpec,
    scheme: &QuadratureScheme,
) -> Result<DirectNorm> {
    sym.check(params)?;
    scheme.validate()?;
    let lattice = make_lattice(family.kernel_radius.max(1.0), 1.0, params.n)?;
    let members = family.members(params, &lattice);
    if members.is_empty() {
        return Err(FockError::invalid("family", "test family is empty"));
    }
    let mut best: f64 = 0.0;
    let mut probes = 0;
    for f in &members {
        probes += 1;
        let source = NormTarget::from_function(f, params)?.norm(params, scheme)?;
        if source == 0.0 {
            continue;
        }
        let image = if sym.u.is_zero() {
            0.0
        } else {
            match composite_norm(sym, f, params, scheme) {
                Ok(v) => v,
                Err(FockError::Overflow { .. } | FockError::Divergent(_) | FockError::NonIntegrable(_)) => {
                    f64::INFINITY
                }
                Err(e) => return Err(e),
            }
        };
        let ratio = image / source;
        best = best.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        if best > PROBE_CAP {
            return Ok(DirectNorm {
                value: best,
                exceeded_cap: true,
                probes,
            });
        }
    }
    Ok(DirectNorm {
        value: best,
        exceeded_cap: false,
        probes,
    })
}

/// Admissibility of an affine symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSymbolReport {
    pub op_norm: f64,
    pub admissible_bounded: bool,
    pub admissible_compact: bool,
    /// Unit vectors `w` with `|Aw| = |w|` and `⟨Aw, B⟩ ≠ 0`, as `(re, im)` pairs.
    pub witnesses: Vec<Vec<f64>>,
}

/// `‖A‖ ≤ 1` and `⟨Aw, B⟩ = 0` whenever `|Aw| = |w|` (bounded); `‖A‖ < 1` (compact).
pub fn linear_symbol_check(map: &AffineMap, tol: f64) -> Result<LinearSymbolReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(FockError::invalid("tol", "must be positive"));
    }
    let n = map.dim();
    let svd = map.matrix().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| FockError::Unsupported("singular value decomposition failed".into()))?;
    let op_norm = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let b = Point::from_coords_unchecked(map.translation().to_vec());
    let b_norm = b.norm();
    let mut witnesses = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if (sigma - 1.0).abs() > tol {
            continue;
        }
        // Rows of V* are conjugated right singular vectors.
        let w = Point::from_coords_unchecked((0..n).map(|j| v_t[(k, j)].conj()).collect());
        let image = map.apply(&w).sub(&Point::from_coords_unchecked(map.translation().to_vec()));
        if image.inner(&b).norm() > tol * b_norm {
            witnesses.push(w.reals());
        }
    }
    Ok(LinearSymbolReport {
        op_norm,
        admissible_bounded: op_norm <= 1.0 + tol && witnesses.is_empty(),
        admissible_compact: op_norm < 1.0 - tol,
        witnesses,
    })
}

/// Which exponent regime governs `uC_ψ: F^p_{(m,α)} → F^q_{(m,α)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorRegime {
    /// `p ≤ q < ∞`: `B ∈ L^∞`.
    PLeQ,
    /// `q < p < ∞`: `B ∈ L^{p/(p−q)}`.
    QLtP,
    /// `p = ∞ > q`: `B ∈ L¹`.
    PInfinite,
    /// `q = ∞`: `B^∞ ∈ L^∞`.
    QInfinite,
}

pub fn operator_regime(params: &Params) -> OperatorRegime {
    match (params.p, params.q) {
        (_, Exponent::Infinite) => OperatorRegime::QInfinite,
        (Exponent::Infinite, _) => OperatorRegime::PInfinite,
        (Exponent::Finite(p), Exponent::Finite(q)) if p <= q => OperatorRegime::PLeQ,
        _ => OperatorRegime::QLtP,
    }
}

/// Space receiving `uC_ψ` when `q = ∞`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfinityTarget {
    /// `F^∞`: compactness is decay as `|ψ(z)| → ∞`.
    #[default]
    FockInfinity,
    /// The little-oh subspace: compactness is decay as `|z| → ∞`.
    LittleOh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompopOptions {
    /// Shell radii; the last one is where decay is judged.
    pub radii: Vec<f64>,
    /// Grid step for sampling transforms.
    pub sample_step: f64,
    #[serde(default)]
    pub infinity_target: InfinityTarget,
    pub family: FamilySpec,
}

impl CompopOptions {
    pub fn defaults(n: usize, seed: u64) -> Self {
        CompopOptions {
            radii: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            sample_step: if n == 1 { 0.5 } else { 1.5 },
            infinity_target: InfinityTarget::FockInfinity,
            family: FamilySpec::standard(n, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FockError::invalid("radii", "must be a nonempty increasing list"));
        }
        if self.radii[0] < 1.0 {
            return Err(FockError::invalid("radii", "shells [R−1, R] need R ≥ 1"));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(FockError::invalid("sample_step", "must be positive"));
        }
        Ok(())
    }

    fn last_radius(&self) -> f64 {
        *self.radii.last().expect("validated nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompOpVerdict {
    pub regime: OperatorRegime,
    pub bounded: bool,
    pub compact: bool,
    /// `+∞` (serialized as null) when unbounded.
    pub norm_estimate: f64,
    /// Present when `1 < p ≤ q`, `p ≠ ∞`, and the operator is bounded.
    pub essential_norm_estimate: Option<f64>,
    /// Criterion name → values at the three truncation scales.
    pub transform_summary: BTreeMap<String, ScaledValue>,
    pub transform_divergent: bool,
    pub direct_norm: DirectNorm,
    pub outside_affine_scope: bool,
    pub linear_check: Option<LinearSymbolReport>,
    pub shell_radii: Vec<f64>,
    /// Transform max over each shell `[R−1, R]`.
    pub shell_profile: Vec<f64>,
}

/// Transform values on a sample grid, with the radius used for shells.
struct Samples {
    /// `(|w| or |z|, shell coordinate, value)`.
    rows: Vec<(f64, f64, f64)>,
}

impl Samples {
    fn max_within(&self, radius: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.0 <= radius)
            .map(|r| r.2)
            .fold(0.0, nan_max)
    }

    fn shell_max(&self, outer: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.1 >= outer - 1.0 && r.1 <= outer)
            .map(|r| r.2)
            .fold(0.0, nan_max)
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn sample_berezin(
    sym: &SymbolPair,
    params: &Params,
    radius: f64,
    step: f64,
    scheme: &QuadratureScheme,
) -> Result<Samples> {
    let points = shell_grid(params.n, 0.0, radius, step);
    let values: Vec<Result<f64>> = points
        .par_iter()
        .map(|w| berezin_compop(sym, params, w, scheme))
        .collect();
    let rows = points
        .iter()
        .zip(values)
        .map(|(w, v)| Ok((w.norm(), w.norm(), v?)))
        .collect::<Result<_>>()?;
    Ok(Samples { rows })
}

fn sample_sup(
    sym: &SymbolPair,
    params: &Params,
    radius: f64,
    step: f64,
    target: InfinityTarget,
) -> Samples {
    let points = shell_grid(params.n, 0.0, radius, step);
    let rows = points
        .par_iter()
        .map(|z| {
            let (log, psi_norm) = sup_transform_log(sym, params, z);
            let value = if log > EXP_CAP { f64::INFINITY } else { log.exp() };
            let shell = match target {
                InfinityTarget::FockInfinity => psi_norm,
                InfinityTarget::LittleOh => z.norm(),
            };
            (z.norm(), shell, value)
        })
        .collect();
    Samples { rows }
}

/// `(∫_{|w| ≤ radius} B^e dV)^{1/e}` on a coarse outer grid.
fn berezin_lp(
    sym: &SymbolPair,
    params: &Params,
    exponent: f64,
    radius: f64,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let n = params.n;
    let outer = QuadratureScheme {
        cells_per_axis: Some(if n == 1 { 16 } else { 4 }),
        truncation_radius: None,
        ..scheme.clone()
    };
    let (sym, params, scheme) = (sym.clone(), params.clone(), scheme.clone());
    let field = ScalarField::new(
        n,
        Envelope::compact(Point::origin(n), radius),
        Symmetry::General,
        move |w| {
            if w.norm() > radius {
                return 0.0;
            }
            berezin_compop(&sym, &params, w, &scheme).map_or(f64::NAN, |b| b.powf(exponent))
        },
    )?;
    let integral = integrate_truncated(&field, radius, &outer)?.value;
    Ok(if integral.is_finite() {
        integral.powf(1.0 / exponent)
    } else {
        f64::INFINITY
    })
}

fn essential_applicable(params: &Params) -> bool {
    match (params.p, params.q) {
        (Exponent::Finite(p), q) => p > 1.0 && Exponent::Finite(p).le(q),
        (Exponent::Infinite, _) => false,
    }
}

/// Max of the transform over the outermost shell, as a stand-in for its limsup;
/// raised to `1/q` for finite `q`.
pub fn essential_norm_estimate(
    sym: &SymbolPair,
    params: &Params,
    radii: &[f64],
    scheme: &QuadratureScheme,
) -> Result<f64> {
    sym.check(params)?;
    if !essential_applicable(params) {
        return Err(FockError::invalid(
            "p",
            "essential-norm estimate needs 1 < p ≤ q and p finite",
        ));
    }
    let opts = CompopOptions {
        radii: radii.to_vec(),
        ..CompopOptions::defaults(params.n, 0)
    };
    opts.validate()?;
    let last = opts.last_radius();
    if sym.u.is_zero() {
        return Ok(0.0);
    }
    match params.q {
        Exponent::Finite(q) => {
            let points = shell_grid(params.n, last - 1.0, last, opts.sample_step);
            let values: Vec<f64> = points
                .par_iter()
                .map(|w| berezin_compop(sym, params, w, scheme))
                .collect::<Result<_>>()?;
            Ok(values.into_iter().fold(0.0, nan_max).powf(1.0 / q))
        }
        Exponent::Infinite => Ok(sample_sup(
            sym,
            params,
            3.0 * last,
            opts.sample_step,
            InfinityTarget::FockInfinity,
        )
        .shell_max(last)),
    }
}

/// Boundedness, compactness and norm estimates for `uC_ψ` in the regime fixed by `(p, q)`.
pub fn classify_compop(
    sym: &SymbolPair,
    params: &Params,
    opts: &CompopOptions,
    scheme: &QuadratureScheme,
) -> Result<CompOpVerdict> {
    sym.check(params)?;
    opts.validate()?;
    scheme.validate()?;
    let regime = operator_regime(params);
    let last = opts.last_radius();
    let mut summary = BTreeMap::new();
    let mut shell_profile = Vec::new();
    let mut essential = None;

    let (criterion, compact_decay, root) = match regime {
        OperatorRegime::PLeQ | OperatorRegime::QInfinite => {
            let (samples, reach, root) = if let Exponent::Finite(q) = params.q {
                let s = sample_berezin(sym, params, SCALES[2] * last, opts.sample_step, scheme)?;
                (s, last, 1.0 / q)
            } else {
                let s = sample_sup(
                    sym,
                    params,
                    SCALES[2] * 2.0 * last,
                    opts.sample_step,
                    opts.infinity_target,
                );
                (s, 2.0 * last, 1.0)
            };
            let sup = ScaledValue::from_values(SCALES.map(|s| samples.max_within(s * reach)));
            shell_profile = opts.radii.iter().map(|&r| samples.shell_max(r)).collect();
            let peak = sup.value();
            let tail = *shell_profile.last().expect("radii nonempty");
            let decays = peak == 0.0 || tail < DECAY_THRESHOLD * peak;
            if essential_applicable(params) {
                essential = Some(tail.powf(root));
            }
            let name = if regime == OperatorRegime::PLeQ {
                "berezin_sup"
            } else {
                "sup_transform_sup"
            };
            summary.insert(name.to_string(), sup);
            (sup, decays, root)
        }
        OperatorRegime::QLtP | OperatorRegime::PInfinite => {
            let q = finite_q(params)?;
            let (exponent, name) = match params.p {
                Exponent::Finite(p) => (p / (p - q), "berezin_lp"),
                Exponent::Infinite => (1.0, "berezin_l1"),
            };
            let value = if sym.u.is_zero() {
                ScaledValue::exact(0.0)
            } else {
                probe(|s| berezin_lp(sym, params, exponent, s * last, scheme))?
            };
            summary.insert(name.to_string(), value);
            // Bounded and compact coincide in this regime.
            (value, true, 1.0 / q)
        }
    };

    let direct_norm = direct_operator_norm(sym, params, &opts.family, scheme)?;
    let transform_divergent = criterion.divergent;
    let bounded = !transform_divergent && !direct_norm.exceeded_cap;
    let compact = bounded && compact_decay;
    let linear_check = match &sym.psi {
        Symbol::Affine(map) => Some(linear_symbol_check(map, SINGULAR_TOLERANCE)?),
        Symbol::Polynomial(_) => None,
    };
    Ok(CompOpVerdict {
        regime,
        bounded,
        compact,
        norm_estimate: if bounded {
            criterion.value().powf(root)
        } else {
            f64::INFINITY
        },
        essential_norm_estimate: essential.filter(|_| bounded),
        transform_summary: summary,
        transform_divergent,
        direct_norm,
        outside_affine_scope: !sym.psi.is_affine(),
        linear_check,
        shell_radii: opts.radii.clone(),
        shell_profile,
    })
}

/// Serialized symbol: `u` plus an affine `ψ` given by `A` (row-major `[re, im]`
/// entries) and `B` (interleaved re, im), or polynomial coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolRecord {
    pub u: FunctionRecord,
    pub psi: PsiRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiRecord {
    Affine {
        #[serde(rename = "A")]
        a: Vec<[f64; 2]>,
        #[serde(rename = "B")]
        b: Vec<f64>,
    },
    Polynomial { coords: Vec<FunctionRecord> },
}

impl SymbolRecord {
    pub fn to_symbol(&self, n: usize) -> Result<SymbolPair> {
        let psi = match &self.psi {
            PsiRecord::Affine { a, b } => {
                if a.len() != n * n {
                    return Err(FockError::invalid("A", format!("needs {} entries", n * n)));
                }
                if b.len() != 2 * n {
                    return Err(FockError::invalid("B", format!("needs {} reals", 2 * n)));
                }
                let rows = a
                    .chunks(n)
                    .map(|row| row.iter().map(|e| Complex64::new(e[0], e[1])).collect())
                    .collect();
                let shift = b.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
                Symbol::Affine(AffineMap::new(rows, shift)?)
            }
            PsiRecord::Polynomial { coords } => {
                if coords.len() != n {
                    return Err(FockError::invalid("coords", format!("needs {n} coordinates")));
                }
                let polys = coords
                    .iter()
                    .map(|c| match c.to_function(n)? {
                        EntireFunction::Polynomial(p) => Ok(p),
                        _ => Err(FockError::invalid("coords", "each coordinate must be a polynomial")),
                    })
                    .collect::<Result<_>>()?;
                Symbol::Polynomial(polys)
            }
        };
        SymbolPair::new(self.u.to_function(n)?, psi)
    }
}
