//! The standard composition-operator scenarios with their expected verdicts,
//! cross-checked against the pull-back Carleson classification.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carleson::{classify_carleson, CarlesonOptions};
use crate::compop::{
    classify_compop, pullback_grid_radius, AffineMap, CompOpVerdict, CompopOptions, PullbackFamily,
    Symbol, SymbolPair,
};
use crate::error::Result;
use crate::funcspace::{EntireFunction, Params, Polynomial};
use crate::geometry::{make_lattice, Point};
use crate::measures::MeasureFamily;
use crate::quadrature::QuadratureScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub bounded: bool,
    pub compact: bool,
    pub outside_affine_scope: bool,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub params: Params,
    pub symbol: SymbolPair,
    pub expected: Expectation,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn affine(u: EntireFunction, a: Complex64, b: Complex64) -> SymbolPair {
    SymbolPair::new(u, Symbol::Affine(AffineMap::scalar(a, b))).expect("dimension one throughout")
}

fn expect(bounded: bool, compact: bool, outside_affine_scope: bool) -> Expectation {
    Expectation {
        bounded,
        compact,
        outside_affine_scope,
    }
}

/// Eight scenarios on `F²_{(m,1)}(ℂ)`.
pub fn standard_suite() -> Vec<Scenario> {
    let params = |m| Params::finite(1, 1.0, m, 2.0, 2.0).expect("valid parameters");
    let one = || EntireFunction::constant(1, 1.0);
    let rotation = Complex64::from_polar(1.0, PI / 3.0);
    let square = Symbol::Polynomial(vec![Polynomial::monomial(vec![2])]);
    vec![
        Scenario {
            name: "identity",
            params: params(0),
            symbol: affine(one(), c(1.0, 0.0), c(0.0, 0.0)),
            expected: expect(true, false, false),
        },
        Scenario {
            name: "contraction",
            params: params(0),
            symbol: affine(one(), c(0.5, 0.0), c(0.0, 0.0)),
            expected: expect(true, true, false),
        },
        Scenario {
            name: "rotation",
            params: params(1),
            symbol: affine(one(), rotation, c(0.0, 0.0)),
            expected: expect(true, false, false),
        },
        Scenario {
            name: "dilation",
            params: params(0),
            symbol: affine(one(), c(2.0, 0.0), c(0.0, 0.0)),
            expected: expect(false, false, false),
        },
        Scenario {
            name: "translation",
            params: params(0),
            symbol: affine(one(), c(1.0, 0.0), c(1.0, 0.0)),
            expected: expect(false, false, false),
        },
        Scenario {
            name: "square",
            params: params(0),
            symbol: SymbolPair::new(one(), square).expect("dimension one"),
            expected: expect(false, false, true),
        },
        Scenario {
            name: "zero_multiplier",
            params: params(1),
            symbol: affine(EntireFunction::constant(1, 0.0), c(0.5, 0.0), c(0.0, 0.0)),
            expected: expect(true, true, false),
        },
        Scenario {
            name: "damped_kernel",
            params: params(1),
            symbol: affine(
                EntireFunction::kernel(Point::scalar(c(1.0, 0.0))),
                c(0.5, 0.0),
                c(0.0, 0.0),
            ),
            expected: expect(true, true, false),
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteOptions {
    pub compop: CompopOptions,
    /// Run the pull-back Carleson cross-check.
    pub pullback: bool,
    pub pullback_max_radius: f64,
    pub pullback_image_cap: f64,
    pub pullback_step: f64,
}

impl SuiteOptions {
    pub fn defaults(seed: u64) -> Self {
        SuiteOptions {
            compop: CompopOptions::defaults(1, seed),
            pullback: true,
            pullback_max_radius: 6.0,
            pullback_image_cap: 24.0,
            pullback_step: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackCheck {
    pub grid_radius: f64,
    pub grid_step: f64,
    pub is_carleson: bool,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub params: Params,
    pub expected: Expectation,
    pub verdict: CompOpVerdict,
    pub matches_expected: bool,
    /// `max(d/e, e/d)` for direct probe `d` and norm estimate `e`; bounded cases only.
    pub norm_band: Option<f64>,
    pub pullback: Option<PullbackCheck>,
}

fn norm_band(verdict: &CompOpVerdict) -> Option<f64> {
    if !verdict.bounded {
        return None;
    }
    let (d, e) = (verdict.direct_norm.value, verdict.norm_estimate);
    if d == 0.0 && e == 0.0 {
        Some(1.0)
    } else if d > 0.0 && e > 0.0 {
        Some((d / e).max(e / d))
    } else {
        None
    }
}

pub fn pullback_check(
    symbol: &SymbolPair,
    params: &Params,
    opts: &SuiteOptions,
    expected_bounded: bool,
    scheme: &QuadratureScheme,
) -> Result<PullbackCheck> {
    let grid_radius = pullback_grid_radius(
        symbol,
        opts.pullback_max_radius,
        opts.pullback_image_cap,
        opts.pullback_step,
    );
    let family = PullbackFamily {
        symbol: symbol.clone(),
        params: params.clone(),
        grid_radius,
        grid_step: opts.pullback_step,
    };
    let carleson_opts = CarlesonOptions {
        radii: opts.compop.radii.clone(),
        family: opts.compop.family.clone(),
        ..CarlesonOptions::defaults(params, opts.compop.family.seed)?
    };
    let nominal = family.at_scale(1.0)?;
    let r = carleson_opts.r;
    let lattice = make_lattice((nominal.support_radius() + r).max(2.0 * r), r, params.n)?;
    let verdict = classify_carleson(&family, params, &carleson_opts, &lattice, scheme)?;
    Ok(PullbackCheck {
        grid_radius,
        grid_step: opts.pullback_step,
        is_carleson: verdict.is_carleson,
        agrees: verdict.is_carleson == expected_bounded,
    })
}

pub fn run_scenario(
    scenario: &Scenario,
    opts: &SuiteOptions,
    scheme: &QuadratureScheme,
) -> Result<ScenarioReport> {
    let verdict = classify_compop(&scenario.symbol, &scenario.params, &opts.compop, scheme)?;
    let observed = Expectation {
        bounded: verdict.bounded,
        compact: verdict.compact,
        outside_affine_scope: verdict.outside_affine_scope,
    };
    let pullback = if opts.pullback {
        Some(pullback_check(
            &scenario.symbol,
            &scenario.params,
            opts,
            verdict.bounded,
            scheme,
        )?)
    } else {
        None
    };
    Ok(ScenarioReport {
        name: scenario.name.to_string(),
        params: scenario.params.clone(),
        expected: scenario.expected,
        matches_expected: observed == scenario.expected,
        norm_band: norm_band(&verdict),
        verdict,
        pullback,
    })
}

pub fn run_suite(opts: &SuiteOptions, scheme: &QuadratureScheme) -> Result<Vec<ScenarioReport>> {
    standard_suite()
        .iter()
        .map(|s| run_scenario(s, opts, scheme))
        .collect()
}
