//! Common interfaces for functions and densities on [0, 1].

use crate::piecewise::PiecewisePoly;

/// A real function on [0, 1] together with the points where it may fail to be smooth.
pub trait UnitFunction: Sync {
    fn value(&self, x: f64) -> f64;

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    /// Exact piecewise-polynomial form, when one exists.
    fn as_piecewise(&self) -> Option<PiecewisePoly> {
        None
    }
}

/// A probability density on [0, 1], accessed through its logarithm.
pub trait Density: Sync {
    fn log_density(&self, x: f64) -> f64;

    fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    /// Exact piecewise-polynomial log density, when one exists.
    fn log_piecewise(&self) -> Option<PiecewisePoly> {
        None
    }
}

impl UnitFunction for PiecewisePoly {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks().to_vec()
    }

    fn as_piecewise(&self) -> Option<PiecewisePoly> {
        Some(self.clone())
    }
}

/// The uniform density on [0, 1].
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Density for Uniform {
    fn log_density(&self, _x: f64) -> f64 {
        0.0
    }

    fn log_piecewise(&self) -> Option<PiecewisePoly> {
        Some(PiecewisePoly::constant(0.0))
    }
}

/// Density `exp(p - psi)` for a piecewise polynomial `p` normalised numerically.
#[derive(Debug, Clone)]
pub struct PiecewiseLogDensity {
    log_density: PiecewisePoly,
}

impl PiecewiseLogDensity {
    /// Normalises `exp(kernel)`.
    pub fn from_kernel(mut kernel: PiecewisePoly) -> Self {
        let psi = crate::expfam::log_partition_of(&kernel);
        kernel.add_constant(-psi);
        Self {
            log_density: kernel,
        }
    }

    pub fn log_poly(&self) -> &PiecewisePoly {
        &self.log_density
    }
}

impl Density for PiecewiseLogDensity {
    fn log_density(&self, x: f64) -> f64 {
        self.log_density.eval(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.log_density.breaks().to_vec()
    }

    fn log_piecewise(&self) -> Option<PiecewisePoly> {
        Some(self.log_density.clone())
    }
}
