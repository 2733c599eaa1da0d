use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{param}` for {family}: {reason}")]
    InvalidParameter {
        family: &'static str,
        param: &'static str,
        reason: String,
    },

    /// Adaptive quadrature (or a lattice sum) ran out of panels.
    /// `partial_log` is the natural log of the partial estimate.
    #[error("quadrature did not converge: partial log-estimate {partial_log}, achieved relative error {achieved_rel:e}")]
    NotConverged { partial_log: f64, achieved_rel: f64 },

    #[error("grid exhausted: {0}")]
    GridExhausted(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A required premise was not supported by the numerical evidence.
    #[error("premise not satisfied: {0}")]
    PremiseFailed(String),

    #[error("bound is vacuous: contraction factor {factor} >= 1")]
    VacuousBound { factor: f64 },

    #[error("series diverges: {0}")]
    Divergent(String),
}

impl Error {
    pub(crate) fn param(family: &'static str, param: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            family,
            param,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input
    /// or refused premises).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::GridExhausted(_))
    }
}
