use thiserror::Error;

use crate::steadystate::TransitionClass;

/// Errors raised by the steady-state library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("forbidden transition {jg} -> {je}")]
    ForbiddenTransition { jg: String, je: String },

    #[error("singular direction: (a.a) = 0, use the tensor-power route")]
    SingularDirection,

    #[error("degenerate circular pair: polarization is linear")]
    DegeneratePair,

    #[error("not applicable to transition class {0:?}")]
    NotApplicable(TransitionClass),

    #[error("no dark state for transition class {0:?} at this polarization")]
    NoDarkState(TransitionClass),

    #[error("non-unique steady state: two-dimensional dark subspace; integrate the GOBE from an initial state")]
    NonUnique,

    #[error("dark-exception: circular polarization makes the coupling singular")]
    DarkException,

    #[error("not converged: residual {residual:.3e} above {tolerance:.1e} at t_end")]
    NotConverged { residual: f64, tolerance: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
