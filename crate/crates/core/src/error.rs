use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "singular state (last good tau = {tau}): {what} = {value} is at or below the 1e-12 guard"
    )]
    Singularity {
        tau: f64,
        what: &'static str,
        value: f64,
    },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    MaxStepsExceeded { max_steps: usize, t: f64 },

    #[error("non-finite value encountered in {what} at x = {x}")]
    NonFinite { what: &'static str, x: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error {error}")]
    QuadratureFailure { estimate: f64, error: f64 },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
