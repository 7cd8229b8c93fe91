//! Points of ℂⁿ, Euclidean balls, and r/2-lattices on a truncated domain.
//!
//! A lattice here is a finite set of centers `z_k` inside `{|z| ≤ R_dom}` whose
//! pairwise distances are at least `r` (so the balls `D(z_k, r/2)` are
//! disjoint) and whose open balls `D(z_k, r)` cover the shrunken ball
//! `{|z| ≤ R_dom − r}`.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

/// A point of ℂⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<Complex64>,
}

impl Point {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(FockError::invalid("point", "dimension must be at least 1"));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(FockError::invalid("point", "coordinates must be finite"));
        }
        Ok(Point { coords })
    }

    pub fn origin(n: usize) -> Self {
        Point {
            coords: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// One complex coordinate. Handy in tests and for n = 1 scenarios.
    pub fn scalar(z: Complex64) -> Self {
        Point { coords: vec![z] }
    }

    /// Builds a point from interleaved `(re, im)` pairs.
    pub fn from_reals(reals: &[f64]) -> Result<Self> {
        if reals.is_empty() || !reals.len().is_multiple_of(2) {
            return Err(FockError::invalid(
                "point",
                "expected a nonempty list of (re, im) pairs",
            ));
        }
        Point::new(
            reals
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        )
    }

    /// Unchecked constructor for hot loops that produce finite values by construction.
    pub(crate) fn from_reals_unchecked(reals: &[f64]) -> Self {
        Point {
            coords: reals
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        }
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<Complex64>) -> Self {
        Point { coords }
    }

    /// Overwrites the coordinates in place from `(re, im)` pairs; lets hot loops reuse one buffer.
    pub(crate) fn set_reals(&mut self, reals: &[f64]) {
        for (c, pair) in self.coords.iter_mut().zip(reals.chunks_exact(2)) {
            *c = Complex64::new(pair[0], pair[1]);
        }
    }

    /// The point `origin + rho·e₁`, with `e₁` the first real axis.
    pub fn along_axis(origin: &Point, rho: f64) -> Point {
        let mut coords = origin.coords.clone();
        coords[0].re += rho;
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn reals(&self) -> Vec<f64> {
        self.coords.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn dist_sqr(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sqr(other).sqrt()
    }

    /// Hermitian product `⟨z, w⟩ = Σ z_j conj(w_j)`.
    pub fn inner(&self, other: &Point) -> Complex64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn add(&self, other: &Point) -> Point {
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(FockError::DimensionMismatch {
                expected: n,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// A finite r/2-lattice on `{|z| ≤ domain_radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub centers: Vec<Point>,
    pub separation: f64,
    pub domain_radius: f64,
}

impl Lattice {
    /// Wraps an explicit center list. The lattice invariants are not enforced
    /// here; use [`verify_lattice`] to check them.
    pub fn from_centers(centers: Vec<Point>, separation: f64, domain_radius: f64) -> Result<Self> {
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(FockError::invalid("r", "separation must be positive"));
        }
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(FockError::invalid("domain_radius", "must be positive"));
        }
        if let Some(first) = centers.first() {
            let n = first.dim();
            for c in &centers {
                c.check_dim(n)?;
            }
        }
        Ok(Lattice {
            centers,
            separation,
            domain_radius,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        self.centers.first().map(Point::dim)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Greedy maximal r-separated subset of the grid `(r/4)·ℤ^{2n}` restricted to
/// `{|z| ≤ domain_radius}`.
///
/// Grid points are visited by increasing distance from the origin, ties broken
/// lexicographically on the real coordinates, so the first center is always the
/// origin and the output is reproducible. Separation is tested exactly in
/// integer grid units.
pub fn make_lattice(domain_radius: f64, r: f64, n: usize) -> Result<Lattice> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(FockError::invalid("r", "separation must be positive"));
    }
    if !(domain_radius.is_finite() && domain_radius >= 2.0 * r) {
        return Err(FockError::invalid(
            "domain_radius",
            format!("must be at least 2r = {}", 2.0 * r),
        ));
    }
    if n == 0 {
        return Err(FockError::invalid("n", "dimension must be at least 1"));
    }
    let dims = 2 * n;
    let step = r / 4.0;
    let half = (domain_radius / step + 1e-9).floor() as i64;
    let max_norm2 = ((domain_radius / step).powi(2) + 1e-9).floor() as i64;
    let side = (2 * half + 1) as u64;
    let total = (side as f64).powi(dims as i32);
    if total > 2f64.powi(36) {
        return Err(FockError::Unsupported(format!(
            "candidate grid of {total:.3e} points is too large"
        )));
    }
    let total = side.pow(dims as u32);

    // Representations k = a² + b² of each squared radius, in grid units.
    let mut reps2: Vec<Vec<(i64, i64)>> = vec![Vec::new(); max_norm2 as usize + 1];
    for a in -half..=half {
        for b in -half..=half {
            let k = a * a + b * b;
            if k <= max_norm2 {
                reps2[k as usize].push((a, b));
            }
        }
    }

    // Grid offsets strictly closer than r = 4 grid steps.
    let offsets: Vec<Vec<i64>> = integer_ball(dims, 3)
        .into_iter()
        .filter(|v| v.iter().map(|x| x * x).sum::<i64>() < 16)
        .collect();

    let strides: Vec<u64> = (0..dims)
        .map(|i| side.pow((dims - 1 - i) as u32))
        .collect();
    let encode = |c: &[i64]| -> u64 {
        c.iter()
            .zip(&strides)
            .map(|(&x, &s)| (x + half) as u64 * s)
            .sum()
    };
    let decode = |mut key: u64, out: &mut [i64]| {
        for (o, &s) in out.iter_mut().zip(&strides) {
            *o = (key / s) as i64 - half;
            key %= s;
        }
    };

    let mut blocked = vec![0u64; total.div_ceil(64) as usize];
    let mut centers = Vec::new();
    let mut coords = vec![0i64; dims];
    let mut shifted = vec![0i64; dims];
    for k in 0..=max_norm2 {
        let mut keys = Vec::new();
        shell_keys(k, dims, &reps2, &mut Vec::with_capacity(dims), &mut |c| {
            keys.push(encode(c))
        });
        keys.sort_unstable();
        for key in keys {
            if blocked[(key / 64) as usize] >> (key % 64) & 1 == 1 {
                continue;
            }
            decode(key, &mut coords);
            let reals: Vec<f64> = coords.iter().map(|&x| x as f64 * step).collect();
            centers.push(Point::from_reals_unchecked(&reals));
            for off in &offsets {
                let mut inside = true;
                for i in 0..dims {
                    shifted[i] = coords[i] + off[i];
                    if shifted[i].abs() > half {
                        inside = false;
                        break;
                    }
                }
                if inside {
                    let q = encode(&shifted);
                    blocked[(q / 64) as usize] |= 1 << (q % 64);
                }
            }
        }
    }

    Ok(Lattice {
        centers,
        separation: r,
        domain_radius,
    })
}

/// Calls `sink` on every integer vector of length `dims` with squared norm `k`.
fn shell_keys(
    k: i64,
    dims: usize,
    reps2: &[Vec<(i64, i64)>],
    prefix: &mut Vec<i64>,
    sink: &mut dyn FnMut(&[i64]),
) {
    if dims == 2 {
        for &(a, b) in &reps2[k as usize] {
            prefix.push(a);
            prefix.push(b);
            sink(prefix);
            prefix.truncate(prefix.len() - 2);
        }
        return;
    }
    for j in 0..=k {
        for &(a, b) in &reps2[j as usize] {
            prefix.push(a);
            prefix.push(b);
            shell_keys(k - j, dims - 2, reps2, prefix, sink);
            prefix.truncate(prefix.len() - 2);
        }
    }
}

/// All integer vectors in `[-reach, reach]^dims`.
fn integer_ball(dims: usize, reach: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-reach..=reach).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Uniform hash grid over a point set for radius queries. Coordinates are
/// stored bucket by bucket in one flat array so a query touches contiguous memory.
pub struct CenterIndex {
    cell: f64,
    dims: usize,
    /// Cell key → range into `order` / `coords`.
    buckets: FxHashMap<Vec<i64>, (usize, usize)>,
    /// Original point index of each slot.
    order: Vec<usize>,
    coords: Vec<f64>,
    /// Cell offsets for the first query reach, reused by later queries with the same reach.
    offsets: OnceLock<(i64, Vec<Vec<i64>>)>,
}

impl CenterIndex {
    pub fn new(points: &[Point], cell: f64) -> Self {
        let dims = points.first().map_or(0, |p| 2 * p.dim());
        let mut keyed: Vec<(Vec<i64>, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_key(p, cell), i))
            .collect();
        keyed.sort_unstable();
        let mut buckets = FxHashMap::default();
        let mut order = Vec::with_capacity(points.len());
        let mut coords = Vec::with_capacity(points.len() * dims);
        let mut start = 0;
        for (slot, (key, i)) in keyed.iter().enumerate() {
            order.push(*i);
            coords.extend(points[*i].coords().iter().flat_map(|c| [c.re, c.im]));
            if keyed.get(slot + 1).is_none_or(|(next, _)| next != key) {
                buckets.insert(key.clone(), (start, slot + 1));
                start = slot + 1;
            }
        }
        CenterIndex {
            cell,
            dims,
            buckets,
            order,
            coords,
            offsets: OnceLock::new(),
        }
    }

    /// Visits every indexed point with `|p − z| < radius`, passing its index
    /// and squared distance.
    pub fn for_each_within(&self, z: &Point, radius: f64, mut visit: impl FnMut(usize, f64)) {
        let reach = (radius / self.cell).ceil() as i64;
        let base = cell_key(z, self.cell);
        let target = z.reals();
        let r2 = radius * radius;
        let cached = self
            .offsets
            .get_or_init(|| (reach, integer_ball(base.len(), reach)));
        let fresh;
        let offsets = if cached.0 == reach {
            &cached.1
        } else {
            fresh = integer_ball(base.len(), reach);
            &fresh
        };
        let mut key = base.clone();
        for off in offsets {
            for ((k, b), o) in key.iter_mut().zip(&base).zip(off) {
                *k = b + o;
            }
            if let Some(&(start, end)) = self.buckets.get(&key) {
                for slot in start..end {
                    let p = &self.coords[slot * self.dims..(slot + 1) * self.dims];
                    let d2: f64 = p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 < r2 {
                        visit(self.order[slot], d2);
                    }
                }
            }
        }
    }

    pub fn count_within(&self, z: &Point, radius: f64) -> usize {
        let mut count = 0;
        self.for_each_within(z, radius, |_, _| count += 1);
        count
    }
}

fn cell_key(p: &Point, cell: f64) -> Vec<i64> {
    p.coords()
        .iter()
        .flat_map(|c| [(c.re / cell).floor() as i64, (c.im / cell).floor() as i64])
        .collect()
}

/// Max over probes of the number of centers `z_k` with `|probe − z_k| < rho`.
pub fn covering_multiplicity(lat: &Lattice, rho: f64, probes: &[Point]) -> usize {
    if probes.is_empty() || lat.is_empty() {
        return 0;
    }
    let index = CenterIndex::new(&lat.centers, rho);
    probes
        .par_iter()
        .map(|p| index.count_within(p, rho))
        .max()
        .unwrap_or(0)
}

/// Outcome of [`verify_lattice`]. A failing report is data, not an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub center_count: usize,
    /// Exact whenever some pair is closer than `1.25r`; `+∞` when no such pair exists.
    pub min_pair_distance: f64,
    pub probe_count: usize,
    pub uncovered_probe_count: usize,
}

impl LatticeReport {
    /// Separation is compared with a relative slack of `1e-12` since grid
    /// coordinates `k·r/4` round.
    pub fn is_valid(&self, separation: f64) -> bool {
        self.min_pair_distance >= separation * (1.0 - 1e-12) && self.uncovered_probe_count == 0
    }
}

const PAIR_SEARCH_FACTOR: f64 = 1.25;

/// Checks separation exactly and covering of `{|z| ≤ R_dom − r}` by seeded
/// uniform probes.
pub fn verify_lattice(lat: &Lattice, probe_count: usize, seed: u64) -> Result<LatticeReport> {
    if probe_count == 0 {
        return Err(FockError::invalid("probe_count", "must be at least 1"));
    }
    let n = lat
        .dim()
        .ok_or_else(|| FockError::invalid("lattice", "no centers"))?;
    let r = lat.separation;
    let index = CenterIndex::new(&lat.centers, r);
    // A tight search radius keeps the exact separation check cheap in higher dimensions.
    let pair_radius = PAIR_SEARCH_FACTOR * r;
    let pair_index = CenterIndex::new(&lat.centers, pair_radius);

    let min_d2 = lat
        .centers
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut best = f64::INFINITY;
            pair_index.for_each_within(c, pair_radius, |j, d2| {
                if j != i && d2 < best {
                    best = d2;
                }
            });
            best
        })
        .reduce(|| f64::INFINITY, f64::min);

    let probes = uniform_ball_points(n, lat.domain_radius - r, probe_count, seed);
    let uncovered = probes
        .par_iter()
        .filter(|p| index.count_within(p, r) == 0)
        .count();

    Ok(LatticeReport {
        center_count: lat.len(),
        min_pair_distance: min_d2.sqrt(),
        probe_count,
        uncovered_probe_count: uncovered,
    })
}

/// Seeded uniform samples from the closed ball `{|z| ≤ radius}` of ℂⁿ.
pub fn uniform_ball_points(n: usize, radius: f64, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 2 * n;
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let u: f64 = rng.random();
            let rho = radius * u.powf(1.0 / dims as f64);
            let reals: Vec<f64> = dir.iter().map(|x| x / len * rho).collect();
            Point::from_reals_unchecked(&reals)
        })
        .collect()
}

/// Points of the cube grid `step·ℤ^{2n}` with `inner ≤ |z| ≤ outer`.
pub fn shell_grid(n: usize, inner: f64, outer: f64, step: f64) -> Vec<Point> {
    let dims = 2 * n;
    let reach = (outer / step).floor() as i64;
    let lo2 = inner * inner;
    let hi2 = outer * outer;
    let mut out = Vec::new();
    let mut idx = vec![-reach; dims];
    loop {
        let reals: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        let r2: f64 = reals.iter().map(|x| x * x).sum();
        if r2 >= lo2 && r2 <= hi2 {
            out.push(Point::from_reals_unchecked(&reals));
        }
        let mut d = dims;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            if idx[d] < reach {
                idx[d] += 1;
                break;
            }
            idx[d] = -reach;
        }
    }
}
