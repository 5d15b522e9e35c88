use thiserror::Error;

use crate::integrate::Trajectory;

pub type Result<T> = std::result::Result<T, GdadError>;

#[derive(Debug, Error)]
pub enum GdadError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("constant ordering violated: {0}")]
    ConstantOrdering(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported certificate: {0}")]
    UnsupportedCertificate(String),

    #[error("unsupported Lyapunov evaluation: missing {missing}")]
    UnsupportedLyapunov { missing: &'static str },

    #[error("inner maximization did not converge after {iterations} iterations (|grad_y| = {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("non-finite vector field at t = {t}, x = {x:?}, y = {y:?}")]
    FieldEvaluation { t: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("condition number undefined: mu_x = {mu_x}, mu_y = {mu_y}")]
    UndefinedConditionNumber { mu_x: f64, mu_y: f64 },

    #[error("step-size schedule error: {0}")]
    Schedule(String),

    #[error("integration diverged at t = {t}")]
    Divergence { t: f64, partial: Box<Trajectory> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GdadError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        GdadError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
