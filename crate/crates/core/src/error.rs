use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum PofError {
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate labels: training data must contain both classes")]
    DegenerateLabels,

    #[error("degenerate gradient field: cluster mean gradient vanishes")]
    DegenerateGradient,

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PofError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PofError::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        PofError::Numerical(msg.into())
    }

    /// True for errors that stem from bad input data rather than bad arguments or numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            PofError::DegenerateLabels
                | PofError::InconsistentData(_)
                | PofError::OutsideDomain { .. }
                | PofError::Csv(_)
                | PofError::Json(_)
                | PofError::Io(_)
        )
    }

    /// True for solver and integration failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PofError::Numerical(_) | PofError::NonConvergence { .. } | PofError::DegenerateGradient
        )
    }
}

pub type Result<T> = std::result::Result<T, PofError>;
