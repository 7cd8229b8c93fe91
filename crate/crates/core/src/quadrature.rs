//! Gaussian-weighted integration over ℂⁿ ≅ ℝ^{2n}.
//!
//! Integrands are [`ScalarField`]s: nonnegative evaluators carrying an
//! envelope `(1 + ρ)^growth · e^{−decay·ρ²}` with `ρ` the distance past a core
//! ball around `center`. The envelope picks the truncation cube, the tensor
//! midpoint rule does the work, and a second pass at twice the step supplies
//! the error estimate. Fields that are radial about their center skip the
//! cube and use a composite Gauss–Legendre rule along one ray.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{FockError, Result};
use crate::geometry::Point;

const CHUNK: usize = 4096;
const GL_NODES: usize = 8;
const RADIUS_STEP: f64 = 0.25;

/// Upper envelope of a field: outside `D(center, core_radius)` the field is at most
/// `K·(1+ρ)^growth·e^{−decay·ρ²}`, `ρ = |z − center| − core_radius`.
///
/// `decay = ∞` means the field vanishes outside the core ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub growth: f64,
    pub decay: f64,
    pub center: Point,
    pub core_radius: f64,
}

impl Envelope {
    pub fn gaussian(center: Point, decay: f64, growth: f64) -> Self {
        Envelope {
            growth,
            decay,
            center,
            core_radius: 0.0,
        }
    }

    pub fn compact(center: Point, radius: f64) -> Self {
        Envelope {
            growth: 0.0,
            decay: f64::INFINITY,
            center,
            core_radius: radius,
        }
    }

    /// No decay at all; integrals of such fields only exist on truncated domains.
    pub fn flat(center: Point, growth: f64) -> Self {
        Envelope {
            growth,
            decay: 0.0,
            center,
            core_radius: 0.0,
        }
    }

    pub fn with_core(mut self, core_radius: f64) -> Self {
        self.core_radius = core_radius;
        self
    }

    pub fn is_compact(&self) -> bool {
        self.decay == f64::INFINITY
    }

    pub fn powered(&self, p: f64) -> Self {
        Envelope {
            growth: self.growth * p,
            decay: self.decay * p,
            center: self.center.clone(),
            core_radius: self.core_radius,
        }
    }

    pub fn bound(&self, z: &Point) -> f64 {
        let rho = (z.dist(&self.center) - self.core_radius).max(0.0);
        if self.is_compact() {
            return if rho > 0.0 { 0.0 } else { 1.0 };
        }
        (1.0 + rho).powf(self.growth) * (-self.decay * rho * rho).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    General,
    /// Depends only on the distance to the envelope center.
    Radial,
}

type Evaluator = dyn Fn(&Point) -> f64 + Send + Sync;

/// A lazily evaluated nonnegative function on ℂⁿ with envelope metadata.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<Evaluator>,
    envelope: Envelope,
    symmetry: Symmetry,
    dim: usize,
    fitted: Arc<OnceLock<f64>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("envelope", &self.envelope)
            .field("symmetry", &self.symmetry)
            .finish()
    }
}

impl ScalarField {
    pub fn new(
        dim: usize,
        envelope: Envelope,
        symmetry: Symmetry,
        eval: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        envelope.center.check_dim(dim)?;
        if !(envelope.growth.is_finite() && envelope.decay >= 0.0 && envelope.core_radius >= 0.0) {
            return Err(FockError::invalid(
                "envelope",
                "growth must be finite, decay and core radius nonnegative",
            ));
        }
        Ok(ScalarField {
            eval: Arc::new(eval),
            envelope,
            symmetry,
            dim,
            fitted: Arc::new(OnceLock::new()),
        })
    }

    pub fn zero(dim: usize) -> Self {
        ScalarField::new(
            dim,
            Envelope::compact(Point::origin(dim), 0.0),
            Symmetry::Radial,
            |_| 0.0,
        )
        .expect("origin has the right dimension")
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        ScalarField::new(
            dim,
            Envelope::flat(Point::origin(dim), 0.0),
            Symmetry::Radial,
            move |_| value,
        )
        .expect("origin has the right dimension")
    }

    pub fn eval(&self, z: &Point) -> f64 {
        (self.eval)(z)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// `z ↦ field(z)^p`, with the envelope raised accordingly.
    pub fn powered(&self, p: f64) -> ScalarField {
        let inner = self.eval.clone();
        let mut out = self.clone();
        out.eval = Arc::new(move |z| inner(z).powf(p));
        out.envelope = self.envelope.powered(p);
        out.fitted = Arc::new(OnceLock::new());
        out
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        let inner = self.eval.clone();
        let mut out = self.clone();
        out.eval = Arc::new(move |z| factor * inner(z));
        out.fitted = Arc::new(OnceLock::new());
        out
    }

    /// Largest sampled ratio `field / envelope`, i.e. the fitted constant `K`.
    ///
    /// Samples along the real and imaginary axes through the envelope center out
    /// to the truncation radius. Infinite when a sample violates a compact
    /// envelope, NaN when the evaluator produced a negative or non-finite value.
    pub fn fitted_constant(&self) -> f64 {
        *self.fitted.get_or_init(|| {
            let env = &self.envelope;
            let reach = env.core_radius
                + if env.is_compact() || env.decay == 0.0 {
                    4.0
                } else {
                    truncation_radius(env.decay, env.growth.max(0.0), 1e-12, self.dim)
                        .unwrap_or(8.0)
                };
            let mut k: f64 = 0.0;
            for axis in 0..2 * self.dim {
                for sign in [1.0, -1.0] {
                    for i in 0..=32 {
                        let rho = sign * reach * i as f64 / 32.0;
                        let mut reals = env.center.reals();
                        reals[axis] += rho;
                        let z = Point::from_reals_unchecked(&reals);
                        let v = self.eval(&z);
                        if !(v.is_finite() && v >= 0.0) {
                            return f64::NAN;
                        }
                        let b = env.bound(&z);
                        if v > 0.0 {
                            k = k.max(if b > 0.0 { v / b } else { f64::INFINITY });
                        }
                    }
                }
            }
            k
        })
    }
}

/// Quadrature settings. Unset fields fall back to dimension-dependent defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureScheme {
    pub tail_tolerance: f64,
    pub cells_per_axis: Option<usize>,
    pub truncation_radius: Option<f64>,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            tail_tolerance: 1e-12,
            cells_per_axis: None,
            truncation_radius: None,
        }
    }
}

impl QuadratureScheme {
    pub fn with_cells(mut self, cells: usize) -> Self {
        self.cells_per_axis = Some(cells);
        self
    }

    pub fn cells(&self, n: usize) -> usize {
        self.cells_per_axis
            .unwrap_or(if n == 1 { 256 } else { 96 })
            .max(2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(FockError::invalid("tail_tolerance", "must lie in (0, 1)"));
        }
        if let Some(c) = self.cells_per_axis {
            if c < 4 || c % 2 != 0 {
                return Err(FockError::invalid(
                    "cells_per_axis",
                    "must be an even integer of at least 4",
                ));
            }
        }
        if let Some(r) = self.truncation_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(FockError::invalid("truncation_radius", "must be positive"));
            }
        }
        Ok(())
    }

    /// Half-width of the integration cube for a field with this envelope.
    pub fn half_width(&self, env: &Envelope, n: usize) -> Result<f64> {
        if let Some(r) = self.truncation_radius {
            return Ok(r);
        }
        if env.is_compact() {
            return Ok(env.core_radius.max(f64::MIN_POSITIVE));
        }
        if env.decay <= 0.0 {
            return Err(FockError::NonIntegrable(
                "field has no Gaussian decay and is not compactly supported".into(),
            ));
        }
        Ok(env.core_radius + truncation_radius(env.decay, env.growth.max(0.0), self.tail_tolerance, n)?)
    }
}

/// Area of the unit sphere `S^{2n−1} ⊂ ℝ^{2n}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powi(n as i32) / gamma(n as f64)
}

/// Smallest `R` on a 0.25 grid whose closed-form bound on
/// `∫_{|z|>R} (1+|z|)^d e^{−c|z|²} dV` (real dimension 2n) is below `eps`.
///
/// Uses `(1+ρ)^d ≤ (1+1/R)^d ρ^d` for `ρ ≥ R` and the upper incomplete Gamma
/// function for the remaining `∫_R^∞ ρ^{2n−1+d} e^{−cρ²} dρ`.
pub fn truncation_radius(c: f64, d: f64, eps: f64, n: usize) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(FockError::invalid("decay", "must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FockError::invalid("tail_tolerance", "must lie in (0, 1)"));
    }
    if d < 0.0 || n == 0 {
        return Err(FockError::invalid("growth", "must be nonnegative"));
    }
    let a = (2 * n) as f64 / 2.0 + d / 2.0;
    let prefactor = sphere_area(n) * 0.5 * c.powf(-a) * gamma(a);
    let tail = |r: f64| prefactor * (1.0 + 1.0 / r).powf(d) * gamma_ur(a, c * r * r);
    let mut r = RADIUS_STEP;
    while tail(r) >= eps {
        r += RADIUS_STEP;
        if r > 1e4 {
            return Err(FockError::Unsupported("truncation radius above 10⁴".into()));
        }
    }
    Ok(r)
}

/// Result of one quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

impl Integral {
    pub const ZERO: Integral = Integral {
        value: 0.0,
        error_estimate: 0.0,
    };
}

/// `∫ field dV` over ℂⁿ, truncated where the envelope says the tail is below tolerance.
pub fn integrate_gaussian(field: &ScalarField, scheme: &QuadratureScheme) -> Result<Integral> {
    scheme.validate()?;
    let half = scheme.half_width(field.envelope(), field.dim())?;
    integrate_truncated(field, half, scheme)
}

/// Integral of `field` over the cube of half-width `half_width` about its envelope center
/// (or the ball of that radius when the field is radial), ignoring the envelope's decay.
pub fn integrate_truncated(
    field: &ScalarField,
    half_width: f64,
    scheme: &QuadratureScheme,
) -> Result<Integral> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(FockError::invalid("truncation_radius", "must be positive"));
    }
    let n = field.dim();
    let cells = scheme.cells(n);
    let (fine, coarse) = match field.symmetry() {
        Symmetry::Radial => {
            let panels = (cells / 2).max(2);
            (
                radial_rule(field, half_width, panels)?,
                radial_rule(field, half_width, panels / 2)?,
            )
        }
        Symmetry::General => (
            midpoint_rule(field, half_width, cells),
            midpoint_rule(field, half_width, cells / 2),
        ),
    };
    if !fine.is_finite() {
        return Err(FockError::Divergent(format!(
            "quadrature produced a non-finite value {fine}"
        )));
    }
    let total_nodes = (cells as f64).powi(2 * n as i32);
    let roundoff = 16.0 * f64::EPSILON * fine.abs() * total_nodes.log2().max(1.0);
    Ok(Integral {
        value: fine,
        error_estimate: (fine - coarse).abs() + roundoff,
    })
}

/// Tensor midpoint rule on `cells^{2n}` cells, summed in fixed chunks so the
/// result does not depend on how rayon schedules them.
fn midpoint_rule(field: &ScalarField, half_width: f64, cells: usize) -> f64 {
    let n = field.dim();
    let dims = 2 * n;
    let h = 2.0 * half_width / cells as f64;
    let lower: Vec<f64> = field
        .envelope()
        .center
        .reals()
        .iter()
        .map(|c| c - half_width + 0.5 * h)
        .collect();
    let total = cells.pow(dims as u32);
    let chunks = total.div_ceil(CHUNK);
    let sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut z = Point::origin(n);
            let mut reals = vec![0.0; dims];
            let mut values = Vec::with_capacity(end - start);
            for idx in start..end {
                let mut rest = idx;
                for d in (0..dims).rev() {
                    reals[d] = lower[d] + (rest % cells) as f64 * h;
                    rest /= cells;
                }
                z.set_reals(&reals);
                values.push(field.eval(&z));
            }
            pairwise_sum(&values)
        })
        .collect();
    pairwise_sum(&sums) * h.powi(dims as i32)
}

/// `S_{2n−1} ∫_0^R ρ^{2n−1} f(center + ρe₁) dρ` with `panels` Gauss–Legendre panels.
fn radial_rule(field: &ScalarField, radius: f64, panels: usize) -> Result<f64> {
    let n = field.dim();
    let rule = GaussLegendre::new(GL_NODES).map_err(|e| FockError::Unsupported(e.to_string()))?;
    let width = radius / panels as f64;
    let center = &field.envelope().center;
    let sums: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|k| {
            let a = k as f64 * width;
            rule.integrate(a, a + width, |rho| {
                rho.powi(2 * n as i32 - 1) * field.eval(&Point::along_axis(center, rho))
            })
        })
        .collect();
    Ok(sphere_area(n) * pairwise_sum(&sums))
}

/// Pairwise (cascade) summation; the tree shape depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// `(∫ field^p dV)^{1/p}`, for `p ≥ 1`.
pub fn lp_field_norm(field: &ScalarField, p_exp: f64, scheme: &QuadratureScheme) -> Result<f64> {
    check_lp_exponent(p_exp)?;
    let integral = integrate_gaussian(&field.powered(p_exp), scheme)?;
    Ok(integral.value.powf(1.0 / p_exp))
}

/// `(∫ field^p dV)^{1/p}` over the truncated domain of half-width `radius`.
pub fn lp_field_norm_truncated(
    field: &ScalarField,
    p_exp: f64,
    radius: f64,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    check_lp_exponent(p_exp)?;
    let integral = integrate_truncated(&field.powered(p_exp), radius, scheme)?;
    Ok(integral.value.powf(1.0 / p_exp))
}

fn check_lp_exponent(p_exp: f64) -> Result<()> {
    if !(p_exp >= 1.0 && p_exp.is_finite()) {
        return Err(FockError::invalid(
            "p_exp",
            "L^p norms of fields need a finite exponent p ≥ 1",
        ));
    }
    Ok(())
}

/// Maximum of a field over `{|z| ≤ search_radius}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupResult {
    pub value: f64,
    pub argmax: Point,
}

/// Grid search at `step` over `{|z| ≤ search_radius}`, then one refinement pass at
/// `step/8` around the best grid point. Radial fields are scanned along one ray.
pub fn sup_field_norm(field: &ScalarField, search_radius: f64, step: f64) -> Result<SupResult> {
    if !(step > 0.0 && search_radius > 0.0 && step <= search_radius) {
        return Err(FockError::invalid(
            "step",
            "need 0 < step ≤ search_radius",
        ));
    }
    let n = field.dim();
    if field.symmetry() == Symmetry::Radial {
        return radial_sup(field, search_radius, step);
    }
    let dims = 2 * n;
    let reach = (search_radius / step).floor() as i64;
    let side = (2 * reach + 1) as usize;
    let total = side.pow(dims as u32);
    let r2 = search_radius * search_radius;
    let coarse = best_on_grid(field, total, |idx, reals| {
        let mut rest = idx;
        for d in (0..dims).rev() {
            reals[d] = ((rest % side) as i64 - reach) as f64 * step;
            rest /= side;
        }
        reals.iter().map(|x| x * x).sum::<f64>() <= r2
    });
    let Some((_, base)) = coarse else {
        let origin = Point::origin(n);
        return Ok(SupResult {
            value: field.eval(&origin),
            argmax: origin,
        });
    };
    let fine_step = step / 8.0;
    let fine_side = 17usize;
    let fine_total = fine_side.pow(dims as u32);
    let base_reals = base.clone();
    let refined = best_on_grid(field, fine_total, |idx, reals| {
        let mut rest = idx;
        for d in (0..dims).rev() {
            reals[d] = base_reals[d] + ((rest % fine_side) as f64 - 8.0) * fine_step;
            rest /= fine_side;
        }
        reals.iter().map(|x| x * x).sum::<f64>() <= r2
    });
    let (value, reals) = refined.expect("refinement grid contains the coarse maximizer");
    Ok(SupResult {
        value,
        argmax: Point::from_reals_unchecked(&reals),
    })
}

/// Deterministic arg-max over `total` candidate indices; `place` fills the
/// coordinates and reports whether the candidate is admissible.
fn best_on_grid(
    field: &ScalarField,
    total: usize,
    place: impl Fn(usize, &mut [f64]) -> bool + Sync,
) -> Option<(f64, Vec<f64>)> {
    let dims = 2 * field.dim();
    let chunks = total.div_ceil(CHUNK);
    let best: Option<(f64, usize)> = (0..chunks)
        .into_par_iter()
        .filter_map(|chunk| {
            let mut reals = vec![0.0; dims];
            let mut z = Point::origin(field.dim());
            let mut best: Option<(f64, usize)> = None;
            for idx in chunk * CHUNK..((chunk + 1) * CHUNK).min(total) {
                if !place(idx, &mut reals) {
                    continue;
                }
                z.set_reals(&reals);
                let v = field.eval(&z);
                if best.is_none_or(|(b, _)| v > b || (v.is_nan() && !b.is_nan())) {
                    best = Some((v, idx));
                }
            }
            best
        })
        .reduce_with(pick_max);
    best.map(|(v, idx)| {
        let mut reals = vec![0.0; dims];
        place(idx, &mut reals);
        (v, reals)
    })
}

fn pick_max(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    // NaN wins so that broken evaluations surface instead of hiding.
    let a_key = if a.0.is_nan() { f64::INFINITY } else { a.0 };
    let b_key = if b.0.is_nan() { f64::INFINITY } else { b.0 };
    if b_key > a_key || (b_key == a_key && b.1 < a.1) {
        b
    } else {
        a
    }
}

fn radial_sup(field: &ScalarField, search_radius: f64, step: f64) -> Result<SupResult> {
    let center = &field.envelope().center;
    let reach = search_radius + center.norm();
    let r2 = search_radius * search_radius;
    let scan = |rhos: Vec<f64>| -> Option<(f64, f64)> {
        let values: Vec<Option<f64>> = rhos
            .par_iter()
            .map(|&rho| {
                let z = Point::along_axis(center, rho);
                (z.norm_sqr() <= r2).then(|| field.eval(&z))
            })
            .collect();
        let mut best: Option<(f64, usize)> = None;
        for (i, v) in values.into_iter().enumerate() {
            if let Some(v) = v {
                best = Some(best.map_or((v, i), |b| pick_max(b, (v, i))));
            }
        }
        best.map(|(v, i)| (v, rhos[i]))
    };
    let count = (reach / step).floor() as usize;
    let coarse: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    let Some((_, rho0)) = scan(coarse) else {
        return Ok(SupResult {
            value: field.eval(center),
            argmax: center.clone(),
        });
    };
    let fine: Vec<f64> = (0..=16)
        .map(|i| rho0 + (i as f64 - 8.0) * step / 8.0)
        .filter(|&r| r >= 0.0)
        .collect();
    let (value, rho) = scan(fine).expect("refinement contains the coarse maximizer");
    Ok(SupResult {
        value,
        argmax: Point::along_axis(center, rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn shifted_gaussian(c: f64, w: Point, symmetry: Symmetry) -> ScalarField {
        let center = w.clone();
        ScalarField::new(
            w.dim(),
            Envelope::gaussian(w.clone(), c, 0.0),
            symmetry,
            move |z| (-c * z.dist_sqr(&center)).exp(),
        )
        .unwrap()
    }

    #[test]
    fn truncation_radius_unit_gaussian() {
        // π e^{−R²} < 10⁻¹² needs R > 5.365.
        let r = truncation_radius(1.0, 0.0, 1e-12, 1).unwrap();
        assert_eq!(r, 5.5);
    }

    #[test]
    fn truncation_radius_is_monotone() {
        let base = truncation_radius(1.0, 0.0, 1e-12, 1).unwrap();
        assert!(truncation_radius(0.5, 0.0, 1e-12, 1).unwrap() > base);
        assert!(truncation_radius(1.0, 4.0, 1e-12, 1).unwrap() > base);
        assert!(truncation_radius(1.0, 0.0, 1e-6, 1).unwrap() <= base);
        assert!(truncation_radius(0.0, 0.0, 1e-12, 1).is_err());
        assert!(truncation_radius(-1.0, 0.0, 1e-12, 1).is_err());
    }

    #[test]
    fn gaussian_integrals_match_closed_form() {
        let scheme = QuadratureScheme::default();
        for w in [0.0, 2.0] {
            let f = shifted_gaussian(0.5, Point::scalar(Complex64::new(w, 0.0)), Symmetry::General);
            let got = integrate_gaussian(&f, &scheme).unwrap();
            assert_relative_eq!(got.value, 2.0 * PI, max_relative = 1e-6);
        }
    }

    #[test]
    fn radial_rule_matches_closed_form() {
        let scheme = QuadratureScheme::default();
        let f = shifted_gaussian(1.0, Point::scalar(Complex64::new(1.0, -1.0)), Symmetry::Radial);
        let got = integrate_gaussian(&f, &scheme).unwrap();
        assert_relative_eq!(got.value, PI, max_relative = 1e-10);
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let got = integrate_gaussian(&ScalarField::zero(1), &QuadratureScheme::default()).unwrap();
        assert_eq!(got, Integral::ZERO);
    }

    #[test]
    fn flat_field_is_not_integrable() {
        let f = ScalarField::constant(1, 1.0);
        assert!(matches!(
            integrate_gaussian(&f, &QuadratureScheme::default()),
            Err(FockError::NonIntegrable(_))
        ));
    }

    #[test]
    fn lp_norms_of_gaussian() {
        let scheme = QuadratureScheme::default();
        let f = shifted_gaussian(1.0, Point::origin(1), Symmetry::General);
        assert_relative_eq!(lp_field_norm(&f, 1.0, &scheme).unwrap(), PI, max_relative = 1e-6);
        assert_relative_eq!(
            lp_field_norm(&f, 2.0, &scheme).unwrap(),
            (PI / 2.0).sqrt(),
            max_relative = 1e-6
        );
        assert_eq!(lp_field_norm(&ScalarField::zero(1), 2.0, &scheme).unwrap(), 0.0);
        assert!(lp_field_norm(&f, 0.5, &scheme).is_err());
    }

    #[test]
    fn sup_of_gaussians() {
        let f = shifted_gaussian(1.0, Point::origin(1), Symmetry::General);
        let s = sup_field_norm(&f, 4.0, 0.25).unwrap();
        assert_eq!(s.value, 1.0);
        assert!(s.argmax.norm() < 1e-12);

        let w0 = Point::scalar(Complex64::new(1.5, 0.0));
        let g = shifted_gaussian(1.0, w0.clone(), Symmetry::General);
        let s = sup_field_norm(&g, 4.0, 0.25).unwrap();
        assert!((s.value - 1.0).abs() < 1e-3);
        assert!(s.argmax.dist(&w0) < 1e-2);

        let c = ScalarField::constant(1, 3.5);
        assert_eq!(sup_field_norm(&c, 2.0, 0.5).unwrap().value, 3.5);
    }

    #[test]
    fn radial_sup_respects_search_ball() {
        let f = ScalarField::new(
            1,
            Envelope::flat(Point::origin(1), 1.0),
            Symmetry::Radial,
            |z| z.norm(),
        )
        .unwrap();
        let s = sup_field_norm(&f, 3.0, 0.5).unwrap();
        assert_relative_eq!(s.value, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn fitted_constant_of_exact_envelope_is_one() {
        let f = shifted_gaussian(1.0, Point::origin(1), Symmetry::General);
        assert_relative_eq!(f.fitted_constant(), 1.0, max_relative = 1e-12);
        let bad = ScalarField::new(1, Envelope::compact(Point::origin(1), 1.0), Symmetry::General, |_| 1.0)
            .unwrap();
        assert_eq!(bad.fitted_constant(), f64::INFINITY);
    }
}
