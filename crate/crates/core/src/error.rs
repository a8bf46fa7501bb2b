use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlassError {
    /// A configuration or argument failed validation. `field` is a dotted path.
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Dense coefficient storage for a degree exceeds the memory budget.
    #[error(
        "capacity exceeded at degree {degree}: {bytes} bytes of coefficients for N={dim} \
         (budget {budget} bytes; desk envelope is N<=128 for p<=3, N<=48 for p=4)"
    )]
    Capacity { degree: u32, dim: usize, bytes: u128, budget: u128 },

    /// Band rejection too high to make progress with the current step size.
    #[error("band rejection rate {rate:.4} too high; try step size eta <= {suggested_eta:.3e}")]
    Tuning { rate: f64, suggested_eta: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GlassError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        GlassError::Invalid { field: field.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, GlassError>;
