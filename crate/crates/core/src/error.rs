use thiserror::Error;

/// Errors raised by the sieve-prior library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point x = {x} lies outside [0, 1]")]
    OutOfDomain { x: f64 },

    #[error("dimension mismatch: expected {expected} coefficients, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("derivative order {r} is not below the spline order {q}")]
    DerivativeOrder { r: usize, q: usize },

    #[error("no root of the covering-ratio equation in (0, 0.25) for rho = {rho}")]
    NoGammaRoot { rho: f64 },

    #[error("the truncated model set is empty")]
    EmptyModelSet,

    #[error("the covering region is empty")]
    EmptyRegion,

    #[error("model dimension {dim} exceeds the brute-force limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("density value {value} at x = {x} is not strictly positive")]
    NonPositiveDensity { x: f64, value: f64 },

    #[error("ill-conditioned least-squares system: {0}")]
    IllConditioned(String),

    #[error("Monte Carlo estimate degenerate: {0}")]
    MonteCarlo(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfDomain { x })
    }
}
