use thiserror::Error;

use crate::integrator::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A model parameter violates its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evaluation would leave the double-precision range.
    #[error("{op} saturated at x = {x:e}: value exceeds double range")]
    Saturated { op: &'static str, x: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The parameters do not belong to the regime the operation requires.
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// The step size fell below the minimum; the partial trajectory is kept.
    #[error("integration stalled at t = {t:e} (step {step:e})")]
    Stalled {
        t: f64,
        step: f64,
        partial: Box<Trajectory>,
    },

    /// A mathematical guarantee was violated by the computation.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
