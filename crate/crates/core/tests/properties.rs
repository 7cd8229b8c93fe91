use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use fock_sobolev::compop::{
    classify_compop, linear_symbol_check, sup_transform, AffineMap, CompopOptions, Symbol,
    SymbolPair, SINGULAR_TOLERANCE,
};
use fock_sobolev::divergence::{is_divergent, SCALES};
use fock_sobolev::funcspace::{fock_sobolev_norm, EntireFunction, Exponent, Params};
use fock_sobolev::geometry::{make_lattice, verify_lattice, Point};
use fock_sobolev::quadrature::{integrate_gaussian, Envelope, QuadratureScheme, ScalarField, Symmetry};

fn point1(re: f64, im: f64) -> Point {
    Point::scalar(Complex64::new(re, im))
}

fn shifted_gaussian(center: Point, c: f64) -> ScalarField {
    let shift = center.clone();
    ScalarField::new(1, Envelope::gaussian(center, c, 0.0), Symmetry::General, move |z| {
        (-c * z.dist_sqr(&shift)).exp() * (1.0 + (z.dist_sqr(&shift)).sin().powi(2))
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_is_translation_invariant(re in -3.0..3.0f64, im in -3.0..3.0f64, c in 0.5..2.0f64) {
        let scheme = QuadratureScheme::default();
        let here = integrate_gaussian(&shifted_gaussian(Point::origin(1), c), &scheme).unwrap().value;
        let there = integrate_gaussian(&shifted_gaussian(point1(re, im), c), &scheme).unwrap().value;
        prop_assert!((here - there).abs() <= 1e-6 * here);
    }

    #[test]
    fn norm_is_absolutely_homogeneous(
        scale in 0.1..10.0f64,
        re in -1.5..1.5f64,
        im in -1.5..1.5f64,
        p in prop::sample::select(vec![1.0, 2.0, 3.0]),
        m in 0u32..3,
    ) {
        let scheme = QuadratureScheme::default();
        let params = Params::finite(1, 1.0, m, p, p).unwrap();
        let f = EntireFunction::kernel_term(point1(re, im), Complex64::new(1.0, 0.0), true, false);
        let g = EntireFunction::kernel_term(point1(re, im), Complex64::new(0.0, scale), true, false);
        let nf = fock_sobolev_norm(&f, &params, &scheme).unwrap();
        let ng = fock_sobolev_norm(&g, &params, &scheme).unwrap();
        prop_assert!((ng - scale * nf).abs() <= 1e-6 * ng);
    }

    #[test]
    fn identity_sup_transform_is_one(re in -5.0..5.0f64, im in -5.0..5.0f64, turn in 0.0..1.0f64) {
        let params = Params::new(1, 1.0, 0, Exponent::Infinite, Exponent::Infinite).unwrap();
        let rotation = Complex64::from_polar(1.0, 2.0 * PI * turn);
        let sym = SymbolPair::new(
            EntireFunction::constant(1, 1.0),
            Symbol::Affine(AffineMap::scalar(rotation, Complex64::new(0.0, 0.0))),
        )
        .unwrap();
        let b = sup_transform(&sym, &params, &point1(re, im)).unwrap();
        prop_assert!((b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn unitary_maps_pass_the_linear_check_without_translation(
        turn in 0.0..1.0f64,
        modulus in 0.05..0.999f64,
        b_re in -2.0..2.0f64,
        b_im in -2.0..2.0f64,
    ) {
        let rotation = Complex64::from_polar(1.0, 2.0 * PI * turn);
        let zero = Complex64::new(0.0, 0.0);
        let b = Complex64::new(b_re, b_im);
        let unitary = linear_symbol_check(&AffineMap::scalar(rotation, zero), SINGULAR_TOLERANCE).unwrap();
        prop_assert!(unitary.admissible_bounded && !unitary.admissible_compact);
        prop_assert!((unitary.op_norm - 1.0).abs() <= 1e-12);
        let contraction = linear_symbol_check(&AffineMap::scalar(rotation * modulus, b), SINGULAR_TOLERANCE).unwrap();
        prop_assert!(contraction.admissible_bounded && contraction.admissible_compact);
        if b.norm() > 1e-3 {
            let shifted = linear_symbol_check(&AffineMap::scalar(rotation, b), SINGULAR_TOLERANCE).unwrap();
            prop_assert!(!shifted.admissible_bounded && !shifted.witnesses.is_empty());
        }
    }

    #[test]
    fn divergence_rule_separates_powers_from_saturation(
        r in 2.0..20.0f64,
        k in 0.5..3.0f64,
        settled in 4.0..40.0f64,
    ) {
        let power = SCALES.map(|s| (r * s).powf(k));
        prop_assert!(is_divergent(power));
        let logarithm = SCALES.map(|s| (r * s).ln() * 100.0);
        prop_assert!(is_divergent(logarithm));
        let saturating = SCALES.map(|s| 1.0 - (-settled * s).exp());
        prop_assert!(!is_divergent(saturating));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn lattices_are_separated_and_covering(r in 0.5..1.5f64, radius in 3.0..7.0f64, seed in 0u64..1000) {
        let lat = make_lattice(radius, r, 1).unwrap();
        let report = verify_lattice(&lat, 20_000, seed).unwrap();
        prop_assert!(report.is_valid(r));
        prop_assert!(lat.centers.iter().all(|z| z.norm() <= radius + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Verdicts do not depend on `p` when `p ≤ q`, and affine verdicts obey the
    /// necessary conditions on the linear part and translation.
    #[test]
    fn affine_verdicts_are_p_independent_and_admissible(
        modulus in prop::sample::select(vec![0.3, 0.5, 0.8, 1.0, 1.5, 2.0]),
        turn in 0.0..1.0f64,
        shift in prop::sample::select(vec![0.0, 0.75]),
    ) {
        let scheme = QuadratureScheme::default();
        let a = Complex64::from_polar(modulus, 2.0 * PI * turn);
        let map = AffineMap::scalar(a, Complex64::new(shift, 0.0));
        let sym = SymbolPair::new(EntireFunction::constant(1, 1.0), Symbol::Affine(map.clone())).unwrap();
        let opts = CompopOptions::defaults(1, 3);
        let verdict = |p| {
            let params = Params::finite(1, 1.0, 0, p, 2.0).unwrap();
            classify_compop(&sym, &params, &opts, &scheme).unwrap()
        };
        let two = verdict(2.0);
        let lower = verdict(1.5);
        prop_assert_eq!((two.bounded, two.compact), (lower.bounded, lower.compact));
        let check = linear_symbol_check(&map, SINGULAR_TOLERANCE).unwrap();
        prop_assert!(!two.bounded || check.admissible_bounded);
        prop_assert!(!two.compact || check.admissible_compact);
    }
}
