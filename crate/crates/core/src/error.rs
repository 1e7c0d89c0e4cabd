use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Validation problems (bad parameters, violated hypotheses) are kept apart
/// from numerical guard failures so callers can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum PclError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("non-finite integrand value {value} at x = {x} ({context})")]
    NonFinite { context: &'static str, x: f64, value: f64 },

    #[error("guard exceeded: {0}")]
    Guard(String),

    #[error("point {0} collides with an existing point of the configuration")]
    DuplicatePoint(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl PclError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        PclError::InvalidParameter { name, reason: reason.into() }
    }

    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PclError::InvalidParameter { .. } | PclError::Hypothesis(_) | PclError::DuplicatePoint(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, PclError>;
