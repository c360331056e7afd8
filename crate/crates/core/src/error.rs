use thiserror::Error;

/// Errors raised by the numerical model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaserError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operating point is not in the masing regime")]
    NotMasing,

    #[error("spectrum requested at the zero-frequency pole")]
    ZeroFrequencyPole,

    #[error("no real root: discriminant {discriminant:e} is negative")]
    NoRealRoot { discriminant: f64 },

    #[error("operating point sits exactly on the masing threshold (gain pole)")]
    AtThreshold,

    #[error("operation requires the {expected} regime, found {found}")]
    Regime {
        expected: &'static str,
        found: String,
    },

    #[error("self-consistent iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("state is not a fixed point of the drift (relative residual {residual:e})")]
    NotAFixedPoint { residual: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, MaserError>;
