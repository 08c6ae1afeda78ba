//! Sieve priors for adaptive Bayesian density estimation and Gaussian regression.
//!
//! The crate builds log-spline and Haar exponential families, the sieve weights
//! over their countable union, and Monte Carlo machinery for posterior tail
//! probabilities, together with numerical validators for the covering,
//! divergence and tail inequalities the contraction theory rests on.

pub mod basis;
pub mod entropy;
pub mod error;
pub mod expfam;
pub mod function;
pub mod harness;
pub mod metrics;
pub mod piecewise;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod sieve;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// The three model families of the sieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SplineDensity,
    HaarDensity,
    SplineRegression,
}

impl Family {
    pub fn is_density(self) -> bool {
        !matches!(self, Family::SplineRegression)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::SplineDensity => "spline-density",
            Family::HaarDensity => "haar-density",
            Family::SplineRegression => "spline-regression",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spline-density" => Ok(Family::SplineDensity),
            "haar-density" => Ok(Family::HaarDensity),
            "spline-regression" => Ok(Family::SplineRegression),
            other => Err(error::invalid(
                "family",
                format!("unknown family `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
