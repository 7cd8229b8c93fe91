//! (p,q) Fock–Carleson classification.
//!
//! A measure `μ` is (p,q) Fock–Carleson when `(∫ |f|^q e^{−αq|z|²/2} dμ)^{1/q} ≲ ‖f‖_{(p,m)}`.
//! With `s = mq`, the criteria are:
//! - `p ≤ q`: the Berezin transform, the averaging function, and the averaging
//!   sequence are bounded;
//! - `q < p`: the same three objects lie in `L^{p/(p−q)}` (resp. `ℓ^{p/(p−q)}`);
//! - `p = ∞`: they lie in `L¹`/`ℓ¹`, equivalently `μ_s(ℂⁿ) < ∞`.
//!
//! Each criterion is computed at three truncation scales and declared finite or
//! divergent by [`crate::divergence`]. A finite family of test functions gives a
//! lower bound on the embedding constant.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::divergence::{probe, ScaledValue};
use crate::error::{FockError, Result};
use crate::funcspace::{
    fock_sobolev_norm, multi_indices, EntireFunction, Exponent, KernelTerm, Params,
};
use crate::geometry::{make_lattice, shell_grid, Lattice, Point};
use crate::measures::{
    averaging_function, averaging_sequence, berezin, sequence_lp, total_weighted_mass, Measure,
    MeasureFamily,
};
use crate::quadrature::{
    integrate_gaussian, lp_field_norm_truncated, sup_field_norm, truncation_radius, Envelope,
    QuadratureScheme, ScalarField, Symmetry,
};

/// Fraction of the profile maximum below which the averaging function counts as vanished.
pub const VANISHING_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p ≤ q < ∞`.
    PLeQ,
    /// `q < p < ∞`.
    QLtP,
    /// `p = ∞`, `q < ∞`.
    PInfinite,
}

pub fn regime(params: &Params) -> Result<Regime> {
    let Exponent::Finite(q) = params.q else {
        return Err(FockError::invalid("q", "Carleson embeddings need a finite q"));
    };
    Ok(match params.p {
        Exponent::Infinite => Regime::PInfinite,
        Exponent::Finite(p) if p <= q => Regime::PLeQ,
        Exponent::Finite(_) => Regime::QLtP,
    })
}

fn finite_q(params: &Params) -> Result<f64> {
    params
        .q
        .finite()
        .ok_or_else(|| FockError::invalid("q", "must be finite here"))
}

/// `∫ |f|^q e^{−αq|z|²/2} dμ`.
pub fn embedding_integral(
    mu: &Measure,
    f: &EntireFunction,
    params: &Params,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let q = finite_q(params)?;
    f.check_dim(params.n)?;
    let (alpha, m) = (params.alpha, params.m);
    match mu {
        Measure::Atomic { atoms, .. } => Ok(atoms
            .iter()
            .map(|a| {
                let z = &a.location;
                a.weight * (q * (f.log_modulus(z, alpha, m) - alpha * z.norm_sqr() / 2.0)).exp()
            })
            .sum()),
        Measure::Density(d) => {
            let prof = f.profile();
            let symmetry = if prof.radial && prof.center.norm_sqr() == 0.0 {
                Symmetry::Radial
            } else {
                Symmetry::General
            };
            let envelope = Envelope::gaussian(
                prof.center.clone(),
                alpha * q / 2.0,
                q * prof.degree + d.kind.growth().max(0.0),
            )
            .with_core(prof.core_radius);
            let (g, d) = (f.clone(), d.clone());
            let field = ScalarField::new(params.n, envelope, symmetry, move |z| {
                let dens = d.at(z);
                if dens == 0.0 {
                    return 0.0;
                }
                dens * (q * (g.log_modulus(z, alpha, m) - alpha * z.norm_sqr() / 2.0)).exp()
            })?;
            Ok(integrate_gaussian(&field, scheme)?.value)
        }
    }
}

/// `(∫ |f|^q e^{−αq|z|²/2} dμ)^{1/q} / ‖f‖_{(p,m)}`.
pub fn embedding_ratio(
    mu: &Measure,
    f: &EntireFunction,
    params: &Params,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let norm = fock_sobolev_norm(f, params, scheme)?;
    if norm.is_nan() || norm <= 0.0 {
        return Err(FockError::ZeroNorm);
    }
    let q = finite_q(params)?;
    Ok(embedding_integral(mu, f, params, scheme)?.powf(1.0 / q) / norm)
}

/// The finite test family used for lower bounds on embedding and operator norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Kernel centers `w` run over a grid of this step inside `|w| ≤ kernel_radius`.
    pub kernel_radius: f64,
    pub kernel_step: f64,
    /// Monomials `z^β` with `|β| ≤ monomial_degree`.
    pub monomial_degree: u32,
    /// Random combinations of normalized kernels centered on lattice points.
    pub random_combos: usize,
    pub combo_terms: usize,
    pub seed: u64,
}

impl FamilySpec {
    pub fn standard(n: usize, seed: u64) -> Self {
        FamilySpec {
            kernel_radius: 4.0,
            kernel_step: if n == 1 { 1.0 } else { 2.0 },
            monomial_degree: 6,
            random_combos: 20,
            combo_terms: 3,
            seed,
        }
    }

    /// Kernel probes `k_w` and, when `m > 0`, `ξ_{(w,m)}`.
    pub fn kernel_members(&self, params: &Params) -> Vec<EntireFunction> {
        let mut out = Vec::new();
        for w in shell_grid(params.n, 0.0, self.kernel_radius, self.kernel_step) {
            out.push(EntireFunction::normalized_kernel(w.clone()));
            if params.m > 0 {
                out.push(EntireFunction::sobolev_kernel(w));
            }
        }
        out
    }

    pub fn members(&self, params: &Params, lat: &Lattice) -> Vec<EntireFunction> {
        let mut out = self.kernel_members(params);
        out.extend(
            multi_indices(params.n, self.monomial_degree)
                .into_iter()
                .map(EntireFunction::monomial),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let origin = [Point::origin(params.n)];
        let centers: &[Point] = if lat.is_empty() { &origin } else { &lat.centers };
        for _ in 0..self.random_combos {
            let terms = (0..self.combo_terms)
                .map(|_| {
                    let center = centers[rng.random_range(0..centers.len())].clone();
                    let coeff = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    KernelTerm {
                        center,
                        coeff,
                        normalized: true,
                        sobolev_scaled: false,
                    }
                })
                .collect();
            out.push(EntireFunction::KernelCombo(terms));
        }
        out
    }
}

/// Largest embedding ratio over the test family; a lower bound on the Carleson constant.
pub fn carleson_lower_bound(
    mu: &Measure,
    params: &Params,
    family: &FamilySpec,
    lat: &Lattice,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let members = family.members(params, lat);
    if members.is_empty() {
        return Err(FockError::invalid("family", "test family is empty"));
    }
    let mut best: f64 = 0.0;
    for f in &members {
        match embedding_ratio(mu, f, params, scheme) {
            Ok(r) => best = best.max(r),
            Err(FockError::ZeroNorm) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Max of the averaging function over each shell `R ≤ |z| ≤ R + r`.
pub fn vanishing_profile(
    mu: &Measure,
    s: f64,
    r: f64,
    radii: &[f64],
    scheme: &QuadratureScheme,
) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FockError::invalid("radii", "must be strictly increasing"));
    }
    let field = averaging_function(mu, s, r, scheme)?;
    radii
        .iter()
        .map(|&radius| {
            if radius < r {
                return Err(FockError::invalid("radii", "each radius must be at least r"));
            }
            Ok(shell_max(&field, radius, radius + r, r))
        })
        .collect()
}

/// Max of a field over `inner ≤ |z| ≤ outer`, sampled at `step/8` along a ray
/// for radial fields and on a `step/4` grid otherwise.
pub(crate) fn shell_max(field: &ScalarField, inner: f64, outer: f64, step: f64) -> f64 {
    let radial_about_origin =
        field.symmetry() == Symmetry::Radial && field.envelope().center.norm_sqr() == 0.0;
    // Adding +0 turns a −0 maximum into +0.
    let max = if radial_about_origin {
        let origin = Point::origin(field.dim());
        let count = ((outer - inner) / (step / 8.0)).ceil() as usize;
        (0..=count)
            .map(|i| {
                let rho = (inner + i as f64 * step / 8.0).min(outer);
                field.eval(&Point::along_axis(&origin, rho))
            })
            .fold(0.0, f64::max)
    } else {
        shell_grid(field.dim(), inner, outer, step / 4.0)
            .iter()
            .map(|z| field.eval(z))
            .fold(0.0, f64::max)
    };
    max + 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlesonOptions {
    /// Berezin parameter `t`.
    pub t: f64,
    /// Ball radius `r` of the averaging function.
    pub r: f64,
    /// Shell radii of the vanishing profile.
    pub radii: Vec<f64>,
    pub family: FamilySpec,
}

impl CarlesonOptions {
    /// `t = q`, `r = 1`, shells at 2..6.
    pub fn defaults(params: &Params, seed: u64) -> Result<Self> {
        Ok(CarlesonOptions {
            t: finite_q(params)?,
            r: 1.0,
            radii: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            family: FamilySpec::standard(params.n, seed),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(FockError::invalid("t", "must be positive"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(FockError::invalid("r", "must be positive"));
        }
        if self.radii.is_empty() || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FockError::invalid("radii", "must be a nonempty increasing list"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonVerdict {
    pub regime: Regime,
    pub s: f64,
    pub t: f64,
    pub r: f64,
    /// Criterion name → values at the three truncation scales.
    pub criteria: BTreeMap<String, ScaledValue>,
    pub embedding_lower_bound: f64,
    pub is_carleson: bool,
    pub is_vanishing: bool,
    /// Max ratio between q-th roots of the criterion values; absent when a criterion diverges.
    pub comparability_band: Option<f64>,
    /// Max ratio among the raw criterion values and `embedding_lower_bound^q`.
    pub chain_band: Option<f64>,
    pub vanishing_radii: Vec<f64>,
    pub vanishing_profile: Vec<f64>,
}

/// Ratio of the largest to the smallest value; 1 for an all-zero list, `None` if
/// only some values vanish.
pub fn band(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        Some(1.0)
    } else if min > 0.0 && max.is_finite() {
        Some(max / min)
    } else {
        None
    }
}

struct ScaleContext {
    mu: Measure,
    lattice: Lattice,
    domain: f64,
}

/// The three comparable quantities at one exponent, each at three truncation scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriterionNorms {
    /// `‖μ̃_{(t,s)}‖_{L^p}`.
    pub berezin: ScaledValue,
    /// `‖μ_{(s,r,D)}‖_{L^p}`.
    pub averaging: ScaledValue,
    /// `‖(μ_{(s,r,D)}(z_k))_k‖_{ℓ^p}` over the lattice.
    pub sequence: ScaledValue,
}

/// `L^p` norms of the Berezin transform and the averaging function, and the `ℓ^p`
/// norm of the averaging sequence; `p = ∞` takes sups.
#[allow(clippy::too_many_arguments)]
pub fn criterion_norms(
    family: &dyn MeasureFamily,
    params: &Params,
    s: f64,
    t: f64,
    r: f64,
    exponent: Exponent,
    lat: &Lattice,
    scheme: &QuadratureScheme,
) -> Result<CriterionNorms> {
    let n = params.n;
    if family.dim() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            found: family.dim(),
        });
    }
    if !(t > 0.0 && r > 0.0 && s.is_finite()) {
        return Err(FockError::invalid("t", "t and r must be positive, s finite"));
    }
    let reach = truncation_radius(t * params.alpha / 2.0, 0.0, scheme.tail_tolerance, n)?;
    let context = |factor: f64| -> Result<ScaleContext> {
        let mu = family.at_scale(factor)?;
        let lattice = if factor == 1.0 {
            lat.clone()
        } else {
            make_lattice((lat.domain_radius * factor).max(2.0 * lat.separation), lat.separation, n)?
        };
        let domain = mu.support_radius() + r + reach;
        Ok(ScaleContext {
            mu,
            lattice,
            domain,
        })
    };
    let sup_step = |field: &ScalarField| {
        if field.symmetry() == Symmetry::Radial {
            r / 4.0
        } else if n == 1 {
            r / 2.0
        } else {
            r
        }
    };
    let field_norm = |field: &ScalarField, domain: f64| -> Result<f64> {
        match exponent {
            Exponent::Infinite => Ok(sup_field_norm(field, domain, sup_step(field))?.value),
            Exponent::Finite(e) => lp_field_norm_truncated(field, e, domain, scheme),
        }
    };
    Ok(CriterionNorms {
        berezin: probe(|f| {
            let c = context(f)?;
            field_norm(&berezin(&c.mu, t, s, params, scheme)?, c.domain)
        })?,
        averaging: probe(|f| {
            let c = context(f)?;
            field_norm(&averaging_function(&c.mu, s, r, scheme)?, c.domain)
        })?,
        sequence: probe(|f| {
            let c = context(f)?;
            sequence_lp(&averaging_sequence(&c.mu, s, r, &c.lattice, scheme)?, exponent)
        })?,
    })
}

/// Classifies `μ` (or the family of its truncations) against the criteria of the regime fixed by `(p, q)`.
pub fn classify_carleson(
    family: &dyn MeasureFamily,
    params: &Params,
    opts: &CarlesonOptions,
    lat: &Lattice,
    scheme: &QuadratureScheme,
) -> Result<CarlesonVerdict> {
    params.validate()?;
    opts.validate()?;
    scheme.validate()?;
    let regime = regime(params)?;
    let q = finite_q(params)?;
    let n = params.n;
    if family.dim() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            found: family.dim(),
        });
    }
    let s = params.m as f64 * q;
    let (t, r) = (opts.t, opts.r);

    let mut criteria = BTreeMap::new();
    let (exponent, tag) = match (regime, params.p) {
        (Regime::PLeQ, _) => (Exponent::Infinite, "sup"),
        (_, Exponent::Finite(p)) => (Exponent::Finite(p / (p - q)), "lp"),
        (_, Exponent::Infinite) => (Exponent::Finite(1.0), "l1"),
    };
    let norms = criterion_norms(family, params, s, t, r, exponent, lat, scheme)?;
    criteria.insert(format!("berezin_{tag}"), norms.berezin);
    criteria.insert(format!("averaging_{tag}"), norms.averaging);
    criteria.insert(format!("sequence_{tag}"), norms.sequence);
    if regime == Regime::PInfinite {
        criteria.insert(
            "weighted_mass".to_string(),
            probe(|f| Ok(total_weighted_mass(&family.at_scale(f)?, s, scheme)?.value))?,
        );
    }

    let is_carleson = criteria.values().all(|c| !c.divergent);
    let base = family.at_scale(1.0)?;
    let embedding_lower_bound = carleson_lower_bound(&base, params, &opts.family, lat, scheme)?;

    let last = *opts.radii.last().expect("validated nonempty");
    let profiled = family.extended_to(last + 2.0 * r)?;
    let profile = vanishing_profile(&profiled, s, r, &opts.radii, scheme)?;
    let peak = profile.iter().copied().fold(0.0, f64::max);
    let decays = peak == 0.0 || *profile.last().expect("nonempty") < VANISHING_THRESHOLD * peak;

    let values: Vec<f64> = criteria.values().map(|c| c.value()).collect();
    let (comparability_band, chain_band) = if is_carleson {
        let roots: Vec<f64> = values.iter().map(|v| v.powf(1.0 / q)).collect();
        let mut chain = values.clone();
        chain.push(embedding_lower_bound.powf(q));
        (band(&roots), band(&chain))
    } else {
        (None, None)
    };

    Ok(CarlesonVerdict {
        regime,
        s,
        t,
        r,
        criteria,
        embedding_lower_bound,
        is_carleson,
        is_vanishing: is_carleson && decays,
        comparability_band,
        chain_band,
        vanishing_radii: opts.radii.clone(),
        vanishing_profile: profile,
    })
}
