//! Finite-or-infinite decisions for quantities computed on truncated domains.
//!
//! A quantity is evaluated at truncation scales `R/1.5`, `R`, `1.5R`. It is
//! declared divergent when it is non-finite, or when it still grows by more
//! than 5% over the last step and the last increment is at least 0.9 times the
//! previous one. The second condition separates power-law and logarithmic
//! growth (increment ratio ≥ 1) from quantities that saturate slowly.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Truncation scale factors, smallest first.
pub const SCALES: [f64; 3] = [1.0 / 1.5, 1.0, 1.5];

/// Relative growth from `R` to `1.5R` below which a value counts as settled.
pub const GROWTH_TOLERANCE: f64 = 0.05;

/// Minimum ratio of successive increments for sustained growth.
pub const INCREMENT_RATIO: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    /// Values at the three scales of [`SCALES`].
    pub values: [f64; 3],
    pub divergent: bool,
}

impl ScaledValue {
    pub fn from_values(values: [f64; 3]) -> Self {
        ScaledValue {
            values,
            divergent: is_divergent(values),
        }
    }

    /// A value that does not depend on the truncation.
    pub fn exact(value: f64) -> Self {
        ScaledValue::from_values([value; 3])
    }

    /// The value at the nominal scale.
    pub fn value(&self) -> f64 {
        self.values[1]
    }
}

pub fn is_divergent([small, mid, large]: [f64; 3]) -> bool {
    if !(small.is_finite() && mid.is_finite() && large.is_finite()) {
        return true;
    }
    if large <= (1.0 + GROWTH_TOLERANCE) * mid {
        return false;
    }
    let last = large - mid;
    let previous = mid - small;
    previous <= 0.0 || last >= INCREMENT_RATIO * previous
}

/// Evaluates `f` at each of the three scales.
pub fn probe(f: impl Fn(f64) -> Result<f64>) -> Result<ScaledValue> {
    Ok(ScaledValue::from_values([f(SCALES[0])?, f(SCALES[1])?, f(SCALES[2])?]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_finite() {
        assert!(!is_divergent([3.0, 3.0, 3.0]));
        assert!(!is_divergent([0.0, 0.0, 0.0]));
    }

    #[test]
    fn power_laws_diverge() {
        for k in [0.5, 1.0, 2.0] {
            let v = SCALES.map(|s: f64| (6.0 * s).powf(k));
            assert!(is_divergent(v), "R^{k}");
        }
    }

    #[test]
    fn logarithmic_growth_diverges() {
        assert!(is_divergent(SCALES.map(|s: f64| (6.0 * s).ln())));
    }

    #[test]
    fn saturating_values_are_finite() {
        // 1 − 1/R converges; its increments shrink by 1/1.5.
        assert!(!is_divergent(SCALES.map(|s: f64| 1.0 - 1.0 / (1.0 + 6.0 * s))));
        assert!(!is_divergent(SCALES.map(|s: f64| 1.0 - (-6.0 * s).exp())));
    }

    #[test]
    fn non_finite_values_diverge() {
        assert!(is_divergent([1.0, f64::INFINITY, f64::INFINITY]));
        assert!(is_divergent([1.0, 2.0, f64::NAN]));
    }
}
