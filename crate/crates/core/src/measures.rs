//! Positive measures on ℂⁿ and the objects derived from them: ball masses,
//! averaging functions `μ_{(s,r,D)}(z) = μ(D(z,r))/(1+|z|)^s`, averaging
//! sequences on a lattice, and `(t,s)`-Berezin transforms
//! `μ̃_{(t,s)}(w) = ∫ (1+|z|)^{−s} e^{−tα|z−w|²/2} dμ(z)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::funcspace::{Exponent, Params};
use crate::geometry::{Lattice, Point};
use crate::quadrature::{
    pairwise_sum, truncation_radius, Envelope, QuadratureScheme, ScalarField, Symmetry,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Point,
    pub weight: f64,
}

/// Radial density profiles, all functions of `|z|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DensityKind {
    Lebesgue,
    /// `e^{−c|z|²}`.
    Gaussian { c: f64 },
    /// `(1+|z|)^a`.
    PolyGrowth { a: f64 },
    /// Indicator of the annulus `||z| − center_radius| < width/2`.
    Ring { center_radius: f64, width: f64 },
}

impl DensityKind {
    pub fn at_radius(&self, rho: f64) -> f64 {
        match *self {
            DensityKind::Lebesgue => 1.0,
            DensityKind::Gaussian { c } => (-c * rho * rho).exp(),
            DensityKind::PolyGrowth { a } => (1.0 + rho).powf(a),
            DensityKind::Ring {
                center_radius,
                width,
            } => {
                if (rho - center_radius).abs() < width / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Polynomial growth exponent of the density at infinity (−∞ when it decays faster).
    pub fn growth(&self) -> f64 {
        match *self {
            DensityKind::Lebesgue => 0.0,
            DensityKind::PolyGrowth { a } => a,
            DensityKind::Gaussian { .. } | DensityKind::Ring { .. } => f64::NEG_INFINITY,
        }
    }
}

/// `scale · kind(|z|)` restricted to `{|z| ≤ truncation}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub kind: DensityKind,
    pub scale: f64,
    pub truncation: f64,
    pub dim: usize,
}

impl Density {
    pub fn at_radius(&self, rho: f64) -> f64 {
        if rho <= self.truncation {
            self.scale * self.kind.at_radius(rho)
        } else {
            0.0
        }
    }

    pub fn at(&self, z: &Point) -> f64 {
        self.at_radius(z.norm())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Measure {
    Atomic { dim: usize, atoms: Vec<Atom> },
    Density(Density),
}

impl Measure {
    pub fn atomic(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            a.location.check_dim(dim)?;
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(FockError::invalid("atoms", "weights must be positive and finite"));
            }
        }
        Ok(Measure::Atomic { dim, atoms })
    }

    pub fn dirac(location: Point, weight: f64) -> Result<Self> {
        Measure::atomic(location.dim(), vec![Atom { location, weight }])
    }

    pub fn empty(dim: usize) -> Self {
        Measure::Atomic {
            dim,
            atoms: Vec::new(),
        }
    }

    pub fn density(kind: DensityKind, dim: usize, truncation: f64) -> Result<Self> {
        let d = Density {
            kind,
            scale: 1.0,
            truncation,
            dim,
        };
        validate_density(&d)?;
        Ok(Measure::Density(d))
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Atomic { dim, .. } => *dim,
            Measure::Density(d) => d.dim,
        }
    }

    /// Radius of a ball about the origin containing the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            Measure::Atomic { atoms, .. } => {
                atoms.iter().map(|a| a.location.norm()).fold(0.0, f64::max)
            }
            Measure::Density(d) => d.truncation,
        }
    }

    /// `λ·μ`.
    pub fn scaled(&self, factor: f64) -> Result<Measure> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(FockError::invalid("scale", "must be positive and finite"));
        }
        Ok(match self {
            Measure::Atomic { dim, atoms } => Measure::Atomic {
                dim: *dim,
                atoms: atoms
                    .iter()
                    .map(|a| Atom {
                        location: a.location.clone(),
                        weight: a.weight * factor,
                    })
                    .collect(),
            },
            Measure::Density(d) => Measure::Density(Density {
                scale: d.scale * factor,
                ..d.clone()
            }),
        })
    }

    /// `μ + ν` for two atomic measures.
    pub fn sum(&self, other: &Measure) -> Result<Measure> {
        match (self, other) {
            (Measure::Atomic { dim, atoms }, Measure::Atomic { dim: d2, atoms: a2 }) if dim == d2 => {
                Ok(Measure::Atomic {
                    dim: *dim,
                    atoms: atoms.iter().chain(a2).cloned().collect(),
                })
            }
            _ => Err(FockError::Unsupported(
                "sums are only formed between atomic measures of one dimension".into(),
            )),
        }
    }
}

fn validate_density(d: &Density) -> Result<()> {
    if d.dim == 0 {
        return Err(FockError::invalid("n", "dimension must be at least 1"));
    }
    if !(d.truncation > 0.0 && d.truncation.is_finite()) {
        return Err(FockError::invalid("truncation", "must be positive and finite"));
    }
    if !(d.scale > 0.0 && d.scale.is_finite()) {
        return Err(FockError::invalid("scale", "must be positive and finite"));
    }
    match d.kind {
        DensityKind::Gaussian { c } if !(c > 0.0 && c.is_finite()) => {
            Err(FockError::invalid("c", "must be positive"))
        }
        DensityKind::PolyGrowth { a } if !a.is_finite() => Err(FockError::invalid("a", "must be finite")),
        DensityKind::Ring {
            center_radius,
            width,
        } if !(center_radius >= 0.0 && width > 0.0 && width.is_finite() && center_radius.is_finite()) => {
            Err(FockError::invalid(
                "width",
                "ring needs center_radius ≥ 0 and width > 0",
            ))
        }
        _ => Ok(()),
    }
}

/// A measure that can be re-truncated at a larger or smaller scale; used to
/// tell finite criteria from divergent ones.
pub trait MeasureFamily: Send + Sync {
    fn dim(&self) -> usize;
    /// The member with every truncation length multiplied by `factor`.
    fn at_scale(&self, factor: f64) -> Result<Measure>;
    /// The nominal member, with any truncation pushed out to at least `radius`.
    fn extended_to(&self, radius: f64) -> Result<Measure> {
        let _ = radius;
        self.at_scale(1.0)
    }
}

impl MeasureFamily for Measure {
    fn dim(&self) -> usize {
        Measure::dim(self)
    }

    /// Densities stretch their truncation; finite atomic measures are their own family.
    fn at_scale(&self, factor: f64) -> Result<Measure> {
        match self {
            Measure::Density(d) => Ok(Measure::Density(Density {
                truncation: d.truncation * factor,
                ..d.clone()
            })),
            atomic => Ok(atomic.clone()),
        }
    }

    fn extended_to(&self, radius: f64) -> Result<Measure> {
        match self {
            Measure::Density(d) => Ok(Measure::Density(Density {
                truncation: d.truncation.max(radius),
                ..d.clone()
            })),
            atomic => Ok(atomic.clone()),
        }
    }
}

/// Polar-coordinate rule on `D(center, radius)` for n = 1, 2; cell centers of a
/// cube grid in higher dimension.
struct BallRule {
    /// `(offset, weight)` pairs; offsets are relative to the ball center.
    nodes: Vec<(Vec<f64>, f64)>,
}

impl BallRule {
    fn new(n: usize, radius: f64, resolution: usize) -> Result<Self> {
        let gl = |k| GaussLegendre::new(k).map_err(|e| FockError::Unsupported(e.to_string()));
        let panels = ((radius / 0.5).ceil() as usize).max(2);
        let radial = gl(8)?;
        let width = radius / panels as f64;
        let mut rho_nodes = Vec::with_capacity(panels * 8);
        for k in 0..panels {
            let a = k as f64 * width;
            for (x, w) in radial.iter() {
                rho_nodes.push((a + (x + 1.0) * width / 2.0, w * width / 2.0));
            }
        }
        let mut nodes = Vec::new();
        match n {
            1 => {
                let angles = resolution.max(16);
                let dt = 2.0 * PI / angles as f64;
                for &(rho, wr) in &rho_nodes {
                    for j in 0..angles {
                        let th = j as f64 * dt;
                        nodes.push((vec![rho * th.cos(), rho * th.sin()], wr * rho * dt));
                    }
                }
            }
            2 => {
                // Hopf coordinates on S³: dσ = sin η cos η dη dξ₁ dξ₂.
                let eta_rule = gl(12)?;
                let angles = (resolution / 2).max(16);
                let dt = 2.0 * PI / angles as f64;
                for &(rho, wr) in &rho_nodes {
                    for (x, we) in eta_rule.iter() {
                        let eta = (x + 1.0) * PI / 4.0;
                        let w_eta = we * PI / 4.0 * eta.sin() * eta.cos();
                        for j in 0..angles {
                            let a1 = j as f64 * dt;
                            for k in 0..angles {
                                let a2 = k as f64 * dt;
                                nodes.push((
                                    vec![
                                        rho * eta.sin() * a1.cos(),
                                        rho * eta.sin() * a1.sin(),
                                        rho * eta.cos() * a2.cos(),
                                        rho * eta.cos() * a2.sin(),
                                    ],
                                    wr * rho.powi(3) * w_eta * dt * dt,
                                ));
                            }
                        }
                    }
                }
            }
            _ => {
                let cells = resolution.clamp(4, 24);
                let dims = 2 * n;
                let h = 2.0 * radius / cells as f64;
                let total = cells.pow(dims as u32);
                for idx in 0..total {
                    let mut rest = idx;
                    let mut off = vec![0.0; dims];
                    for d in (0..dims).rev() {
                        off[d] = -radius + ((rest % cells) as f64 + 0.5) * h;
                        rest /= cells;
                    }
                    if off.iter().map(|x| x * x).sum::<f64>() < radius * radius {
                        nodes.push((off, h.powi(dims as i32)));
                    }
                }
            }
        }
        Ok(BallRule { nodes })
    }

    fn integrate(&self, center: &Point, f: impl Fn(&Point) -> f64) -> f64 {
        let base = center.reals();
        let mut z = center.clone();
        let mut reals = base.clone();
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .map(|(off, w)| {
                for (r, (b, o)) in reals.iter_mut().zip(base.iter().zip(off)) {
                    *r = b + o;
                }
                z.set_reals(&reals);
                w * f(&z)
            })
            .collect();
        pairwise_sum(&terms)
    }
}

fn ball_resolution(scheme: &QuadratureScheme, n: usize) -> usize {
    (scheme.cells(n) / 4).max(16)
}

/// `μ(D(z, r))`: exact for atoms, polar quadrature for densities.
pub fn ball_mass(mu: &Measure, z: &Point, r: f64, scheme: &QuadratureScheme) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(FockError::invalid("r", "must be positive"));
    }
    z.check_dim(mu.dim())?;
    Ok(match mu {
        Measure::Atomic { atoms, .. } => atomic_ball_mass(atoms, z, r * r),
        Measure::Density(d) => {
            let rule = BallRule::new(d.dim, r, ball_resolution(scheme, d.dim))?;
            rule.integrate(z, |x| d.at(x))
        }
    })
}

fn atomic_ball_mass(atoms: &[Atom], z: &Point, r2: f64) -> f64 {
    atoms
        .iter()
        .filter(|a| a.location.dist_sqr(z) < r2)
        .map(|a| a.weight)
        .sum()
}

/// `z ↦ μ(D(z,r)) / (1+|z|)^s`.
pub fn averaging_function(
    mu: &Measure,
    s: f64,
    r: f64,
    scheme: &QuadratureScheme,
) -> Result<ScalarField> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(FockError::invalid("r", "must be positive"));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(FockError::invalid("s", "must be nonnegative"));
    }
    let n = mu.dim();
    let origin = Point::origin(n);
    match mu {
        Measure::Atomic { atoms, .. } => {
            let atoms = Arc::new(atoms.clone());
            let envelope = Envelope::compact(origin, mu.support_radius() + r);
            ScalarField::new(n, envelope, Symmetry::General, move |z| {
                atomic_ball_mass(&atoms, z, r * r) / (1.0 + z.norm()).powf(s)
            })
        }
        Measure::Density(d) => {
            let rule = Arc::new(BallRule::new(n, r, ball_resolution(scheme, n))?);
            let envelope = match d.kind {
                DensityKind::Gaussian { c } => {
                    Envelope::gaussian(origin, c, 0.0).with_core(r)
                }
                _ => Envelope::compact(origin, d.truncation + r),
            };
            let d = d.clone();
            ScalarField::new(n, envelope, Symmetry::Radial, move |z| {
                if z.norm() >= d.truncation + r {
                    return 0.0;
                }
                rule.integrate(z, |x| d.at(x)) / (1.0 + z.norm()).powf(s)
            })
        }
    }
}

/// The averaging function sampled at every lattice center, in center order.
pub fn averaging_sequence(
    mu: &Measure,
    s: f64,
    r: f64,
    lat: &Lattice,
    scheme: &QuadratureScheme,
) -> Result<Vec<f64>> {
    if let Some(d) = lat.dim() {
        if d != mu.dim() {
            return Err(FockError::DimensionMismatch {
                expected: mu.dim(),
                found: d,
            });
        }
    }
    let field = averaging_function(mu, s, r, scheme)?;
    Ok(lat.centers.par_iter().map(|z| field.eval(z)).collect())
}

/// `w ↦ ∫ (1+|z|)^{−s} e^{−tα|z−w|²/2} dμ(z)`.
pub fn berezin(
    mu: &Measure,
    t: f64,
    s: f64,
    params: &Params,
    scheme: &QuadratureScheme,
) -> Result<ScalarField> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(FockError::invalid("t", "must be positive"));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(FockError::invalid("s", "must be nonnegative"));
    }
    if params.n != mu.dim() {
        return Err(FockError::DimensionMismatch {
            expected: params.n,
            found: mu.dim(),
        });
    }
    let n = mu.dim();
    let rate = t * params.alpha / 2.0;
    let origin = Point::origin(n);
    match mu {
        Measure::Atomic { atoms, .. } => {
            let weighted: Arc<Vec<(Point, f64)>> = Arc::new(
                atoms
                    .iter()
                    .map(|a| (a.location.clone(), a.weight * (1.0 + a.location.norm()).powf(-s)))
                    .collect(),
            );
            let envelope = Envelope::gaussian(origin, rate, 0.0).with_core(mu.support_radius());
            ScalarField::new(n, envelope, Symmetry::General, move |w| {
                weighted
                    .iter()
                    .map(|(loc, c)| c * (-rate * loc.dist_sqr(w)).exp())
                    .sum()
            })
        }
        Measure::Density(d) => {
            let reach = truncation_radius(rate, 0.0, scheme.tail_tolerance, n)?;
            let rule = Arc::new(BallRule::new(n, reach, ball_resolution(scheme, n))?);
            let envelope = Envelope::gaussian(origin, rate, 0.0).with_core(d.truncation);
            let d = d.clone();
            ScalarField::new(n, envelope, Symmetry::Radial, move |w| {
                if w.norm() > d.truncation + reach {
                    return 0.0;
                }
                rule.integrate(w, |z| {
                    let rho = z.norm();
                    d.at_radius(rho) * (1.0 + rho).powf(-s) * (-rate * z.dist_sqr(w)).exp()
                })
            })
        }
    }
}

/// ℓ^p norm of a finite sequence, or its maximum at `p = ∞`.
pub fn sequence_lp(seq: &[f64], p_exp: Exponent) -> Result<f64> {
    match p_exp {
        Exponent::Infinite => Ok(seq.iter().copied().fold(0.0, f64::max)),
        Exponent::Finite(p) if p >= 1.0 && p.is_finite() => {
            let powers: Vec<f64> = seq.iter().map(|x| x.powf(p)).collect();
            Ok(pairwise_sum(&powers).powf(1.0 / p))
        }
        Exponent::Finite(_) => Err(FockError::invalid("p_exp", "sequence norms need p ≥ 1")),
    }
}

/// `μ_s(ℂⁿ) = ∫ (1+|z|)^{−s} dμ` on the truncated domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedMass {
    pub value: f64,
    /// The untruncated density would have infinite weighted mass.
    pub diverges_untruncated: bool,
}

pub fn total_weighted_mass(mu: &Measure, s: f64, scheme: &QuadratureScheme) -> Result<WeightedMass> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(FockError::invalid("s", "must be nonnegative"));
    }
    match mu {
        Measure::Atomic { atoms, .. } => {
            let terms: Vec<f64> = atoms
                .iter()
                .map(|a| a.weight * (1.0 + a.location.norm()).powf(-s))
                .collect();
            Ok(WeightedMass {
                value: pairwise_sum(&terms),
                diverges_untruncated: false,
            })
        }
        Measure::Density(d) => {
            let n = d.dim;
            let radial = ScalarField::new(
                n,
                Envelope::compact(Point::origin(n), d.truncation),
                Symmetry::Radial,
                {
                    let d = d.clone();
                    move |z| {
                        let rho = z.norm();
                        d.at_radius(rho) * (1.0 + rho).powf(-s)
                    }
                },
            )?;
            let value = crate::quadrature::integrate_truncated(&radial, d.truncation, scheme)?.value;
            // ∫ (1+|z|)^{a−s} dV over ℂⁿ is finite iff a − s < −2n.
            let diverges = d.kind.growth() - s >= -2.0 * n as f64;
            Ok(WeightedMass {
                value,
                diverges_untruncated: diverges,
            })
        }
    }
}

/// Serialized form of a measure, as read from scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureRecord {
    /// Rows `[re_1, im_1, …, re_n, im_n, weight]`.
    Atomic { atoms: Vec<Vec<f64>> },
    Density {
        id: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        truncation: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl MeasureRecord {
    pub fn to_measure(&self, n: usize) -> Result<Measure> {
        match self {
            MeasureRecord::Atomic { atoms } => {
                let mut out = Vec::with_capacity(atoms.len());
                for row in atoms {
                    if row.len() != 2 * n + 1 {
                        return Err(FockError::invalid(
                            "atoms",
                            format!("each atom needs {} coordinates and a weight", 2 * n),
                        ));
                    }
                    out.push(Atom {
                        location: Point::from_reals(&row[..2 * n])?,
                        weight: row[2 * n],
                    });
                }
                Measure::atomic(n, out)
            }
            MeasureRecord::Density {
                id,
                params,
                truncation,
                scale,
            } => {
                let take = |keys: &[&str]| -> Result<Vec<f64>> {
                    if let Some(extra) = params.keys().find(|k| !keys.contains(&k.as_str())) {
                        return Err(FockError::invalid(
                            extra.clone(),
                            format!("unknown parameter for density `{id}`"),
                        ));
                    }
                    keys.iter()
                        .map(|k| {
                            params.get(*k).copied().ok_or_else(|| {
                                FockError::invalid(*k, format!("required by density `{id}`"))
                            })
                        })
                        .collect()
                };
                let kind = match id.as_str() {
                    "lebesgue" => {
                        take(&[])?;
                        DensityKind::Lebesgue
                    }
                    "gaussian" => DensityKind::Gaussian { c: take(&["c"])?[0] },
                    "polygrowth" => DensityKind::PolyGrowth { a: take(&["a"])?[0] },
                    "ring" => {
                        let v = take(&["center_radius", "width"])?;
                        DensityKind::Ring {
                            center_radius: v[0],
                            width: v[1],
                        }
                    }
                    other => {
                        return Err(FockError::invalid(
                            "id",
                            format!("unknown density `{other}`"),
                        ))
                    }
                };
                let d = Density {
                    kind,
                    scale: *scale,
                    truncation: *truncation,
                    dim: n,
                };
                validate_density(&d)?;
                Ok(Measure::Density(d))
            }
        }
    }
}
