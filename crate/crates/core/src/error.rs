use thiserror::Error;

/// Errors raised by the numerical layers.
///
/// Verdict-bearing operations never use `Divergent` for a "not bounded" answer;
/// that outcome is data. `Divergent` is reserved for quantities that were
/// expected to be finite (a norm of a test function, a single transform value).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("exponent {exponent:.3} exceeds the overflow cap {cap}")]
    Overflow { exponent: f64, cap: f64 },

    #[error("integrand is not integrable: {0}")]
    NonIntegrable(String),

    #[error("quantity diverges: {0}")]
    Divergent(String),

    #[error("test function has zero norm")]
    ZeroNorm,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl FockError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FockError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FockError>;
