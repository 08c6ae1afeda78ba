//! True densities and regression functions for experiments.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::HaarBasis;
use crate::error::{invalid, Result};
use crate::expfam::{log_partition_of, CdfTable, ExpFamDensity};
use crate::function::{Density, PiecewiseLogDensity, Uniform, UnitFunction};
use crate::piecewise::PiecewisePoly;
use crate::posterior::TruthRef;
use crate::quadrature::integrate_breaks;
use crate::rng::derived_rng;

/// Deepest Haar level used for Besov-ball truths.
pub const MAX_BESOV_LEVEL: usize = 12;
/// Fraction of `H_0^2` used by the generated coefficients.
pub const BESOV_FILL: f64 = 0.81;
const GRID: usize = 4097;

/// Named test functions on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedFunction {
    /// `sin(2 pi x)`
    Sin,
    /// `cos(2 pi x)`
    Cos,
    /// `|x - 1/2|`
    Abs,
    /// `1 - |2x - 1|`
    Tent,
    /// `(x - 1/2) |x - 1/2|`
    SignedSquare,
    /// `x`
    Linear,
    /// `|x - a| - a / 2` with `a = (sqrt 5 - 1) / 2`, a kink that never falls on a uniform knot
    Kink,
}

/// Kink location of [`NamedFunction::Kink`].
pub const KINK_AT: f64 = 0.618_033_988_749_894_9;

impl NamedFunction {
    pub fn value(self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// `r`-th derivative (one-sided where the function has a kink).
    pub fn derivative(self, r: usize, x: f64) -> f64 {
        let t = x - 0.5;
        let sgn = if t < 0.0 { -1.0 } else { 1.0 };
        match self {
            Self::Sin | Self::Cos => {
                let w = 2.0 * PI;
                let phase = if self == Self::Sin { 0.0 } else { PI / 2.0 };
                w.powi(r as i32) * (w * x + phase + r as f64 * PI / 2.0).sin()
            }
            Self::Abs => match r {
                0 => t.abs(),
                1 => sgn,
                _ => 0.0,
            },
            Self::Tent => match r {
                0 => 1.0 - (2.0 * x - 1.0).abs(),
                1 => -2.0 * sgn,
                _ => 0.0,
            },
            Self::SignedSquare => match r {
                0 => t * t.abs(),
                1 => 2.0 * t.abs(),
                2 => 2.0 * sgn,
                _ => 0.0,
            },
            Self::Kink => match r {
                0 => (x - KINK_AT).abs() - KINK_AT / 2.0,
                1 => {
                    if x < KINK_AT {
                        -1.0
                    } else {
                        1.0
                    }
                }
                _ => 0.0,
            },
            Self::Linear => match r {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            },
        }
    }

    pub fn breakpoints(self) -> Vec<f64> {
        match self {
            Self::Abs | Self::Tent | Self::SignedSquare => vec![0.0, 0.5, 1.0],
            Self::Kink => vec![0.0, KINK_AT, 1.0],
            _ => vec![0.0, 1.0],
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

/// Declarative description of a truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthSpec {
    Uniform,
    /// Log-spline density with the given coefficients.
    Logspline {
        theta: Vec<f64>,
        q: usize,
        k: usize,
    },
    /// Density proportional to `exp(scale * g(x))`.
    Smooth {
        function: NamedFunction,
        s: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Haar log-density with weighted coefficient energy `0.81 H_0^2`.
    Besov {
        besov_alpha: f64,
        h0: f64,
        seed: u64,
        #[serde(default)]
        levels: Option<usize>,
    },
    /// Regression function `scale * g(x)`.
    Regression {
        function: NamedFunction,
        #[serde(default = "default_scale")]
        scale: f64,
        sup_bound: f64,
        sigma: f64,
        #[serde(default)]
        s: Option<f64>,
    },
}

/// Smooth density `exp(scale g - log_norm)`.
#[derive(Debug, Clone, Copy)]
pub struct NamedDensity {
    pub function: NamedFunction,
    pub scale: f64,
    pub log_norm: f64,
}

impl NamedDensity {
    pub fn new(function: NamedFunction, scale: f64) -> Self {
        let z = integrate_breaks(&function.breakpoints(), 1e-14, |x| {
            (scale * function.value(x)).exp()
        });
        Self {
            function,
            scale,
            log_norm: z.ln(),
        }
    }
}

impl Density for NamedDensity {
    fn log_density(&self, x: f64) -> f64 {
        self.scale * self.function.value(x) - self.log_norm
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.function.breakpoints()
    }
}

/// Regression function `scale g`.
#[derive(Debug, Clone, Copy)]
pub struct NamedRegression {
    pub function: NamedFunction,
    pub scale: f64,
}

impl UnitFunction for NamedRegression {
    fn value(&self, x: f64) -> f64 {
        self.scale * self.function.value(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.function.breakpoints()
    }
}

/// Haar coefficients of a Besov-ball truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovCoefficients {
    pub besov_alpha: f64,
    pub h0: f64,
    /// Flat Haar order without the constant.
    pub coefficients: Vec<f64>,
    /// `sum_j (2^{j+1} - 1)^{2 alpha} sum_k d_{j,k}^2`.
    pub weighted_energy: f64,
}

/// Weighted energy of flat Haar coefficients (index 0 is `psi_{0,0}`).
pub fn besov_energy(coefficients: &[f64], besov_alpha: f64) -> f64 {
    coefficients
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (j, _) = HaarBasis::unflatten(i + 1);
            ((2f64).powi(j as i32 + 1) - 1.0).powf(2.0 * besov_alpha) * d * d
        })
        .sum()
}

/// Random coefficients with level energies halving per level, scaled so the weighted energy is
/// `0.81 H_0^2`.
pub fn besov_coefficients(
    besov_alpha: f64,
    h0: f64,
    levels: usize,
    seed: u64,
) -> Result<BesovCoefficients> {
    if !(besov_alpha > 0.0) {
        return Err(invalid("besov_alpha", "must be positive"));
    }
    if !(h0 > 0.0) {
        return Err(invalid("h0", "must be positive"));
    }
    if levels > MAX_BESOV_LEVEL {
        return Err(invalid("levels", format!("at most {MAX_BESOV_LEVEL}")));
    }
    let mut rng = derived_rng(seed, &[0x6265_736f]);
    let total = BESOV_FILL * h0 * h0;
    let shares: Vec<f64> = (0..=levels).map(|j| 0.5f64.powi(j as i32)).collect();
    let share_sum: f64 = shares.iter().sum();
    let mut coefficients = Vec::new();
    for (j, share) in shares.iter().enumerate() {
        let z: Vec<f64> = (0..1usize << j)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let zz: f64 = z.iter().map(|v| v * v).sum();
        let weight = ((2f64).powi(j as i32 + 1) - 1.0).powf(2.0 * besov_alpha);
        let scale = (total * share / share_sum / (weight * zz)).sqrt();
        coefficients.extend(z.iter().map(|v| v * scale));
    }
    let weighted_energy = besov_energy(&coefficients, besov_alpha);
    Ok(BesovCoefficients {
        besov_alpha,
        h0,
        coefficients,
        weighted_energy,
    })
}

/// An evaluable truth.
pub enum Truth {
    Density(Box<dyn Density + Send>),
    Regression {
        f: Box<dyn UnitFunction + Send>,
        sigma: f64,
        sup_bound: f64,
    },
}

/// A truth together with its measured metadata.
pub struct MadeTruth {
    pub truth: Truth,
    /// Largest sup norm of the derivatives of `log f_o` (densities) or `f_o` up to order `s`.
    pub m0: f64,
    pub besov: Option<BesovCoefficients>,
}

impl MadeTruth {
    pub fn as_ref(&self) -> TruthRef<'_> {
        match &self.truth {
            Truth::Density(d) => TruthRef::Density(d.as_ref()),
            Truth::Regression { f, .. } => TruthRef::Regression(f.as_ref()),
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match &self.truth {
            Truth::Regression { sigma, .. } => Some(*sigma),
            Truth::Density(_) => None,
        }
    }

    /// Density data or regression pairs with Gaussian noise.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> crate::posterior::Dataset {
        match &self.truth {
            Truth::Density(d) => crate::posterior::Dataset::Density {
                x: sample_density(d.as_ref(), n, rng),
            },
            Truth::Regression { f, sigma, .. } => {
                let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let y = x
                    .iter()
                    .map(|&xi| f.value(xi) + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                crate::posterior::Dataset::Regression {
                    x,
                    y,
                    sigma: *sigma,
                }
            }
        }
    }
}

/// Sup over a grid (plus breakpoints) of `|g|`.
pub fn grid_sup(breaks: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    let grid = (0..GRID).map(|i| i as f64 / (GRID - 1) as f64);
    grid.chain(breaks.iter().copied())
        .fold(0.0, |m, x| m.max(g(x).abs()))
}

fn named_m0(function: NamedFunction, scale: f64, s: f64) -> f64 {
    let top = s.floor().max(0.0) as usize;
    (0..=top)
        .map(|r| scale.abs() * grid_sup(&function.breakpoints(), |x| function.derivative(r, x)))
        .fold(0.0, f64::max)
}

/// Builds the truth described by `spec`.
pub fn make_truth(spec: &TruthSpec) -> Result<MadeTruth> {
    Ok(match spec {
        TruthSpec::Uniform => MadeTruth {
            truth: Truth::Density(Box::new(Uniform)),
            m0: 0.0,
            besov: None,
        },
        TruthSpec::Logspline { theta, q, k } => {
            let d = ExpFamDensity::spline(*k, *q, theta.clone())?;
            let p = d.log_poly().clone();
            let m0 = (0..*q)
                .map(|r| p.nth_derivative(r).sup_abs())
                .fold(0.0, f64::max);
            MadeTruth {
                truth: Truth::Density(Box::new(d)),
                m0,
                besov: None,
            }
        }
        TruthSpec::Smooth { function, s, scale } => {
            if !scale.is_finite() {
                return Err(invalid("scale", "must be finite"));
            }
            MadeTruth {
                truth: Truth::Density(Box::new(NamedDensity::new(*function, *scale))),
                m0: named_m0(*function, *scale, *s),
                besov: None,
            }
        }
        TruthSpec::Besov {
            besov_alpha,
            h0,
            seed,
            levels,
        } => {
            let levels = levels.unwrap_or(MAX_BESOV_LEVEL);
            let coefs = besov_coefficients(*besov_alpha, *h0, levels, *seed)?;
            let kernel = HaarBasis::new(levels)?.to_piecewise(&coefs.coefficients)?;
            let m0 = kernel.sup_abs();
            MadeTruth {
                truth: Truth::Density(Box::new(PiecewiseLogDensity::from_kernel(kernel))),
                m0,
                besov: Some(coefs),
            }
        }
        TruthSpec::Regression {
            function,
            scale,
            sup_bound,
            sigma,
            s,
        } => {
            if !(*sigma > 0.0) {
                return Err(invalid("sigma", "must be positive"));
            }
            let f = NamedRegression {
                function: *function,
                scale: *scale,
            };
            let sup = grid_sup(&function.breakpoints(), |x| f.value(x));
            if !(sup < *sup_bound) {
                return Err(invalid(
                    "sup_bound",
                    format!("the regression truth has sup norm {sup}, which must be below M = {sup_bound}"),
                ));
            }
            MadeTruth {
                truth: Truth::Regression {
                    f: Box::new(f),
                    sigma: *sigma,
                    sup_bound: *sup_bound,
                },
                m0: named_m0(*function, *scale, s.unwrap_or(0.0)),
                besov: None,
            }
        }
    })
}

/// I.i.d. draws from a density: inverse CDF for piecewise-polynomial log densities, rejection
/// from the uniform otherwise.
pub fn sample_density<R: Rng + ?Sized>(d: &dyn Density, n: usize, rng: &mut R) -> Vec<f64> {
    if let Some(p) = d.log_piecewise() {
        let table = CdfTable::new(&p);
        return (0..n)
            .map(|_| table.invert(&p, rng.random::<f64>()))
            .collect();
    }
    let breaks = d.breakpoints();
    let envelope = 1.05 * grid_sup(&breaks, |x| d.density(x));
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: f64 = rng.random();
        if rng.random::<f64>() * envelope <= d.density(x) {
            out.push(x);
        }
    }
    out
}

/// `log int exp(p)` re-exported for truth normalisation checks.
pub fn log_normaliser(p: &PiecewisePoly) -> f64 {
    log_partition_of(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_derivatives_match_differences() {
        for f in [
            NamedFunction::Sin,
            NamedFunction::Cos,
            NamedFunction::SignedSquare,
        ] {
            for &x in &[0.1, 0.3, 0.8] {
                let h = 1e-6;
                let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                assert!((fd - f.derivative(1, x)).abs() < 1e-6, "{f:?} at {x}");
            }
        }
    }

    #[test]
    fn besov_energy_is_calibrated() {
        let c = besov_coefficients(0.5, 1.0, 12, 3).unwrap();
        assert!((c.weighted_energy - 0.81).abs() < 1e-12);
        assert_eq!(c.coefficients.len(), (1 << 13) - 1);
    }

    #[test]
    fn regression_sup_bound_enforced() {
        let spec = TruthSpec::Regression {
            function: NamedFunction::Sin,
            scale: 1.0,
            sup_bound: 1.0,
            sigma: 1.0,
            s: None,
        };
        assert!(make_truth(&spec).is_err());
    }
}
