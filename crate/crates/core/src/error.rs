use thiserror::Error;

/// Errors produced by the model, solver and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("interconversion requires exactly one branch, got {0}")]
    BranchCount(usize),

    #[error("step size underflow at t = {t}: dt = {dt:e} < dt_min = {dt_min:e}")]
    StepUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("trajectory is missing the `{0}` channel")]
    MissingChannel(&'static str),

    #[error("{0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
