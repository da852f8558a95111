use thiserror::Error;

/// Errors raised by the solvers, simulators and constructions in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("interval ({a}, {b}] carries mass {mass:e}, below the zero-mass threshold")]
    ZeroMassInterval { a: f64, b: f64, mass: f64 },

    #[error("policy regions are flagged symmetric but label({x}) differs from label({neg})", neg = -x)]
    AsymmetricPolicy { x: f64 },

    #[error("policy regions overlap or are unordered near {at}")]
    MalformedRegions { at: f64 },

    #[error("could not bracket the root after {iterations} doublings")]
    NoBracket { iterations: usize },

    #[error("threshold iteration did not converge after {iterations} iterations (residuals {residuals:?})")]
    NonConvergence { iterations: usize, residuals: (f64, f64) },

    #[error("dp stage (t={t}, En={noisy_left}, Ep={perfect_left}) failed: {source}")]
    StageFailed {
        t: usize,
        noisy_left: usize,
        perfect_left: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("geometry violation: {0}")]
    GeometryViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl Error {
    /// True for errors that come from an iterative solver failing to settle,
    /// including ones wrapped by the dp layer.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::NoBracket { .. } => true,
            Error::StageFailed { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}
