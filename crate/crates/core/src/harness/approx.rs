//! Least-squares spline approximation of a truth.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::expfam::{check_membership, ConstraintSpec, ExpFamDensity};
use crate::metrics::{divergences, gaussian_closed_forms};
use crate::piecewise::PiecewisePoly;
use crate::posterior::TruthRef;
use crate::sieve::ModelIndex;

/// Least-squares grid size.
pub const FIT_GRID: usize = 4096;
/// Sup-error grid points per knot interval.
const SUP_POINTS: usize = 513;
/// Largest bound tried when searching for the smallest feasible `L`.
const MAX_BOUND: u32 = 10_000;

/// Best least-squares spline in one model, with its measured distances to the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationTarget {
    /// Model with the smallest integer `L` whose parameter set contains `beta`.
    pub index: ModelIndex,
    pub beta: Vec<f64>,
    /// `sup |log f_o - log f_beta|` (densities) or `sup |f_o - f_beta|` (regression).
    pub sup_error: f64,
    /// `D(f_o || f_beta)`.
    pub kl: f64,
    /// `V(f_o || f_beta)`.
    pub v: f64,
    pub member: bool,
}

impl ApproximationTarget {
    /// `max(D, V) + eta / n`.
    pub fn risk_bound_lhs(&self, eta: f64, n: usize) -> f64 {
        self.kl.max(self.v) + eta / n as f64
    }
}

/// Least-squares coefficients of `g` on a uniform grid, and the sup error of the fit.
pub fn least_squares_spline(g: &dyn Fn(f64) -> f64, k: usize, q: usize) -> Result<(Vec<f64>, f64)> {
    let basis = SplineBasis::new(k, q)?;
    let m = k + q;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for i in 0..FIT_GRID {
        let x = (i as f64 + 0.5) / FIT_GRID as f64;
        let (first, vals) = basis.eval_nonzero(x);
        let y = g(x);
        for a in 0..q {
            rhs[first + a] += vals[a] * y;
            for b in 0..q {
                gram[(first + a, first + b)] += vals[a] * vals[b];
            }
        }
    }
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    if !(lo > 1e-12 * hi) {
        return Err(Error::IllConditioned(format!(
            "normal equations for k = {k}, q = {q} have condition number {:.3e} on a {FIT_GRID}-point grid",
            hi / lo
        )));
    }
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("normal equations are not positive definite".into()))?
        .solve(&rhs);
    let beta: Vec<f64> = beta.iter().copied().collect();
    let fit = basis.to_piecewise(&beta)?;
    Ok((beta, sup_gap(&fit, g, 0.0)))
}

/// `sup |g - (p - shift)|` on a per-panel grid.
fn sup_gap(p: &PiecewisePoly, g: &dyn Fn(f64) -> f64, shift: f64) -> f64 {
    let b = p.breaks();
    let mut s = 0.0f64;
    for i in 0..p.num_panels() {
        for j in 0..SUP_POINTS {
            let x = b[i] + (b[i + 1] - b[i]) * j as f64 / (SUP_POINTS - 1) as f64;
            s = s.max((g(x) - p.eval_in_panel(i, x) + shift).abs());
        }
    }
    s
}

/// Smallest integer `L` with `beta` in `Theta_j`.
fn smallest_bound(
    index: ModelIndex,
    beta: &[f64],
    sup_bound: Option<f64>,
) -> Result<(ModelIndex, bool)> {
    let with = |l: u32| match index {
        ModelIndex::SplineDensity { k, q, .. } => ModelIndex::spline_density(k, q, l),
        ModelIndex::SplineRegression { k, q, .. } => ModelIndex::spline_regression(k, q, l),
        ModelIndex::HaarDensity { level, .. } => ModelIndex::haar_density(level, l),
    };
    let spec = |l: u32| ConstraintSpec {
        index: with(l),
        sup_bound,
        tolerance: crate::expfam::MEMBERSHIP_TOLERANCE,
    };
    let report = check_membership(beta, &spec(MAX_BOUND))?;
    if !report.accepted {
        return Ok((with(MAX_BOUND), false));
    }
    let need = report
        .checks
        .iter()
        .filter(|c| c.bound == MAX_BOUND as f64)
        .map(|c| c.value)
        .fold(0.0, f64::max);
    let l = (need.ceil() as u32).max(1);
    let accepted = check_membership(beta, &spec(l))?.accepted;
    Ok((with(l), accepted))
}

/// Least-squares fit of `log f_o` (densities, recentred to zero sum) or `f_o` (regression) in the
/// spline model `(k, q)`.
pub fn best_spline_fit(
    truth: TruthRef<'_>,
    k: usize,
    q: usize,
    sigma: Option<f64>,
    sup_bound: Option<f64>,
) -> Result<ApproximationTarget> {
    match truth {
        TruthRef::Density(f) => {
            let g = |x: f64| f.log_density(x);
            let (mut beta, _) = least_squares_spline(&g, k, q)?;
            let mean = beta.iter().sum::<f64>() / beta.len() as f64;
            beta.iter_mut().for_each(|b| *b -= mean);
            let fitted = ExpFamDensity::spline(k, q, beta.clone())?;
            let sup_error = sup_gap(fitted.log_poly(), &g, 0.0);
            let rep = divergences(f, &fitted)?;
            let (index, member) = smallest_bound(ModelIndex::spline_density(k, q, 1), &beta, None)?;
            Ok(ApproximationTarget {
                index,
                beta,
                sup_error,
                kl: rep.kl,
                v: rep.v,
                member,
            })
        }
        TruthRef::Regression(f) => {
            let sigma = sigma
                .ok_or_else(|| crate::error::invalid("sigma", "regression fits need sigma"))?;
            let g = |x: f64| f.value(x);
            let (beta, sup_error) = least_squares_spline(&g, k, q)?;
            let fit = SplineBasis::new(k, q)?.to_piecewise(&beta)?;
            let gd = gaussian_closed_forms(f, &fit, sigma)?;
            let (index, member) =
                smallest_bound(ModelIndex::spline_regression(k, q, 1), &beta, sup_bound)?;
            Ok(ApproximationTarget {
                index,
                beta,
                sup_error,
                kl: gd.kl,
                v: gd.v,
                member,
            })
        }
    }
}

/// Log-log slope of sup errors against `k + 1`.
pub fn approximation_slope(
    g: &dyn Fn(f64) -> f64,
    q: usize,
    ks: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let errs = ks
        .iter()
        .map(|&k| least_squares_spline(g, k, q).map(|r| r.1))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = ks.iter().map(|&k| ((k + 1) as f64).ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    Ok((crate::stats::linear_fit(&x, &y).0, errs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Uniform;

    #[test]
    fn uniform_fit_is_exact() {
        let t = best_spline_fit(TruthRef::Density(&Uniform), 3, 2, None, None).unwrap();
        assert!(t.beta.iter().all(|b| b.abs() < 1e-12));
        assert!(t.sup_error < 1e-12);
        assert!(t.member);
    }

    #[test]
    fn linear_reproduced_by_linear_splines() {
        let (beta, err) = least_squares_spline(&|x| 2.0 * x - 1.0, 2, 2).unwrap();
        assert!(err < 1e-10, "{err} {beta:?}");
    }
}
