use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FptError {
    #[error("frequency must have a strictly positive real part, got {0}")]
    NonPositiveFrequency(Complex64),

    #[error("reflected process lives on [0, inf), got x = {0}")]
    NegativeState(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("payoff term with rate {rate} diverges on segment [{lower}, {upper}]")]
    DivergentPayoff { lower: f64, upper: f64, rate: Complex64 },

    #[error("transform diverges: {0}")]
    Divergent(String),

    #[error("inversion methods disagree at t = {t}: euler {euler}, gaver-stehfest {stehfest}")]
    InversionDisagreement { t: f64, euler: f64, stehfest: f64 },

    #[error("inverted density {value:e} at t = {t} is below the clamp tolerance")]
    NegativeDensity { t: f64, value: f64 },

    #[error("removable-singularity limit is unstable (spread {spread:e})")]
    UnstableLimit { spread: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, FptError>;

pub(crate) fn invalid(msg: impl Into<String>) -> FptError {
    FptError::InvalidParameter(msg.into())
}
