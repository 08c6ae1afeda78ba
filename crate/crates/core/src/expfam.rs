//! Log-linear densities `exp(theta' B - psi(theta))` and the parameter sets `Theta_j`.

use std::sync::OnceLock;

use rand::Rng;

use crate::basis::{FunctionBasis, HaarBasis, SplineBasis};
use crate::error::{check_unit, invalid, Error, Result};
use crate::function::Density;
use crate::piecewise::PiecewisePoly;
use crate::quadrature::{integrate_panel_vec, merge_breaks, small_rule};
use crate::rng::rng_from;
use crate::sieve::ModelIndex;
use crate::Family;

/// Absolute slack granted to every constraint.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;
/// Relative tolerance for the log-normaliser quadrature.
pub const PSI_TOLERANCE: f64 = 1e-13;
/// Number of equal panels in the sampling CDF table.
pub const CDF_PANELS: usize = 4096;

/// The basis behind a model: B-splines (all `m` functions) or Haar wavelets (the `m - 1` non-constant ones).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelBasis {
    Spline(SplineBasis),
    Haar(HaarBasis),
}

impl ModelBasis {
    /// Length of the coefficient vector.
    pub fn param_dim(&self) -> usize {
        match self {
            Self::Spline(b) => b.dim(),
            Self::Haar(h) => h.wavelet_count(),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Spline(b) => b.breakpoints(),
            Self::Haar(h) => h.breakpoints(),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Self::Spline(b) => b.degree(),
            Self::Haar(_) => 0,
        }
    }

    /// `theta' B` as a piecewise polynomial.
    pub fn kernel(&self, theta: &[f64]) -> Result<PiecewisePoly> {
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        Ok(self.kernel_unchecked(theta))
    }

    pub(crate) fn kernel_unchecked(&self, theta: &[f64]) -> PiecewisePoly {
        match self {
            Self::Spline(b) => b.to_piecewise_unchecked(theta),
            Self::Haar(h) => {
                PiecewisePoly::step(h.breakpoints(), h.cell_values(theta)).expect("dyadic cells")
            }
        }
    }

    /// The `param_dim()` feature values at `x` (no constant for Haar).
    pub fn features_into(&self, x: f64, out: &mut [f64]) {
        match self {
            Self::Spline(b) => b.eval_into(x, out),
            Self::Haar(h) => {
                let cell = h.cell_of(x);
                for (i, v) in out.iter_mut().enumerate() {
                    let (j, k) = HaarBasis::unflatten(i + 1);
                    *v = h.wavelet_on_cell(j, k, cell);
                }
            }
        }
    }

    pub fn features(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.param_dim()];
        self.features_into(x, &mut out);
        out
    }

    fn family(&self) -> Family {
        match self {
            Self::Spline(_) => Family::SplineDensity,
            Self::Haar(_) => Family::HaarDensity,
        }
    }
}

/// `log int_0^1 exp(p(x)) dx` by panel-doubling Gauss quadrature with max subtraction.
pub fn log_partition_of(kernel: &PiecewisePoly) -> f64 {
    let shift = kernel.max_value();
    let breaks = kernel.breaks();
    let mut total = 0.0;
    for i in 0..kernel.num_panels() {
        let (a, b) = (breaks[i], breaks[i + 1]);
        let p = kernel.panel(i);
        if kernel.degree() == 0 {
            total += (b - a) * (p[0] - shift).exp();
        } else {
            total += integrate_panel_vec::<1>(a, b, PSI_TOLERANCE, 0.0, |x| {
                [(crate::piecewise::horner(p, x - a) - shift).exp()]
            })[0];
        }
    }
    shift + total.ln()
}

/// `psi(theta) = log int exp(theta' B)`.
pub fn psi(basis: &ModelBasis, theta: &[f64]) -> Result<f64> {
    Ok(log_partition_of(&basis.kernel(theta)?))
}

/// A normalised exponential-family density on [0, 1].
#[derive(Debug)]
pub struct ExpFamDensity {
    basis: ModelBasis,
    theta: Vec<f64>,
    psi: f64,
    log_density: PiecewisePoly,
    cdf: OnceLock<CdfTable>,
}

impl Clone for ExpFamDensity {
    fn clone(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            theta: self.theta.clone(),
            psi: self.psi,
            log_density: self.log_density.clone(),
            cdf: OnceLock::new(),
        }
    }
}

impl ExpFamDensity {
    pub fn new(basis: ModelBasis, theta: Vec<f64>) -> Result<Self> {
        let mut log_density = basis.kernel(&theta)?;
        let psi = log_partition_of(&log_density);
        if !psi.is_finite() {
            return Err(Error::NonFinite("psi"));
        }
        log_density.add_constant(-psi);
        Ok(Self {
            basis,
            theta,
            psi,
            log_density,
            cdf: OnceLock::new(),
        })
    }

    pub fn spline(k: usize, q: usize, theta: Vec<f64>) -> Result<Self> {
        Self::new(ModelBasis::Spline(SplineBasis::new(k, q)?), theta)
    }

    pub fn haar(level: usize, theta: Vec<f64>) -> Result<Self> {
        Self::new(ModelBasis::Haar(HaarBasis::new(level)?), theta)
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn basis(&self) -> &ModelBasis {
        &self.basis
    }

    pub fn family(&self) -> Family {
        self.basis.family()
    }

    pub fn log_poly(&self) -> &PiecewisePoly {
        &self.log_density
    }

    /// `theta' B(x) - psi(theta)`, rejecting points outside [0, 1].
    pub fn log_density_at(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.log_density.eval(x))
    }

    /// Mean `int x f(x) dx`.
    pub fn mean(&self) -> f64 {
        crate::quadrature::integrate_breaks(self.log_density.breaks(), 1e-13, |x| {
            x * self.log_density.eval(x).exp()
        })
    }

    /// CDF at `x` using the sampling table.
    pub fn cdf(&self, x: f64) -> f64 {
        self.table().cdf(&self.log_density, x.clamp(0.0, 1.0))
    }

    fn table(&self) -> &CdfTable {
        self.cdf.get_or_init(|| CdfTable::new(&self.log_density))
    }

    /// `n` i.i.d. draws by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let table = self.table();
        (0..n)
            .map(|_| table.invert(&self.log_density, rng.random::<f64>()))
            .collect()
    }

    pub fn sample_seeded(&self, seed: u64, n: usize) -> Vec<f64> {
        self.sample(n, &mut rng_from(seed))
    }
}

impl Density for ExpFamDensity {
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

/// Convenience: `theta' B(x) - psi(theta)`.
pub fn log_density(basis: &ModelBasis, theta: &[f64], x: f64) -> Result<f64> {
    check_unit(x)?;
    let k = basis.kernel(theta)?;
    Ok(k.eval(x) - log_partition_of(&k))
}

/// Cumulative masses on a fine grid aligned with the density's breakpoints.
#[derive(Debug, Clone)]
pub(crate) struct CdfTable {
    grid: Vec<f64>,
    cum: Vec<f64>,
}

fn panel_mass(log_density: &PiecewisePoly, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let i = log_density.locate(0.5 * (a + b));
    small_rule(12).integrate(a, b, |x| log_density.eval_in_panel(i, x).exp())
}

impl CdfTable {
    pub(crate) fn new(log_density: &PiecewisePoly) -> Self {
        let uniform: Vec<f64> = (0..=CDF_PANELS)
            .map(|i| i as f64 / CDF_PANELS as f64)
            .collect();
        let grid = merge_breaks(&uniform, log_density.breaks());
        let mut cum = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in grid.windows(2) {
            acc += panel_mass(log_density, w[0], w[1]);
            cum.push(acc);
        }
        let total = acc;
        cum.iter_mut().for_each(|c| *c /= total);
        Self { grid, cum }
    }

    fn cdf(&self, log_density: &PiecewisePoly, x: f64) -> f64 {
        let i = self
            .grid
            .partition_point(|&g| g <= x)
            .saturating_sub(1)
            .min(self.grid.len() - 2);
        self.cum[i] + panel_mass(log_density, self.grid[i], x)
    }

    pub(crate) fn invert(&self, log_density: &PiecewisePoly, u: f64) -> f64 {
        let i = self
            .cum
            .partition_point(|&c| c <= u)
            .saturating_sub(1)
            .min(self.grid.len() - 2);
        let (mut lo, mut hi) = (self.grid[i], self.grid[i + 1]);
        let target = u - self.cum[i];
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if panel_mass(log_density, self.grid[i], mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Description of `Theta_j` for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub index: ModelIndex,
    /// Regression sup bound `M`; required for the regression family.
    pub sup_bound: Option<f64>,
    pub tolerance: f64,
}

impl ConstraintSpec {
    pub fn new(index: ModelIndex) -> Self {
        Self {
            index,
            sup_bound: None,
            tolerance: MEMBERSHIP_TOLERANCE,
        }
    }

    pub fn regression(index: ModelIndex, sup_bound: f64) -> Self {
        Self {
            index,
            sup_bound: Some(sup_bound),
            tolerance: MEMBERSHIP_TOLERANCE,
        }
    }
}

/// One measured constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `bound - value`; negative when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub accepted: bool,
    pub checks: Vec<ConstraintCheck>,
}

/// Result of evaluating a parameter against `Theta_j`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluated {
    pub accepted: bool,
    pub checks: Vec<ConstraintCheck>,
    /// `theta' B` (density kernel or regression function).
    pub kernel: PiecewisePoly,
    /// Log-normaliser (zero for regression).
    pub psi: f64,
}

pub(crate) fn evaluate(
    spec: &ConstraintSpec,
    basis: &ModelBasis,
    theta: &[f64],
    early_exit: bool,
) -> Evaluated {
    let tol = spec.tolerance;
    let l = spec.index.bound();
    let mut checks = Vec::new();
    let mut accepted = true;
    let push = |name: String, value: f64, bound: f64, checks: &mut Vec<ConstraintCheck>| {
        let ok = value <= bound + tol;
        checks.push(ConstraintCheck {
            name,
            value,
            bound,
            slack: bound - value,
        });
        ok
    };
    let kernel = basis.kernel_unchecked(theta);
    let mut psi = 0.0;
    match spec.index {
        ModelIndex::SplineDensity { q, .. } => {
            let s: f64 = theta.iter().sum();
            accepted &= push("zero-sum".into(), s.abs(), 0.0, &mut checks);
            if accepted || !early_exit {
                psi = log_partition_of(&kernel);
                let range =
                    (0..kernel.num_panels()).fold((f64::INFINITY, f64::NEG_INFINITY), |acc, i| {
                        let (lo, hi) = kernel.panel_range(i);
                        (acc.0.min(lo), acc.1.max(hi))
                    });
                let sup0 = (range.0 - psi).abs().max((range.1 - psi).abs());
                accepted &= push("sup|log f|".into(), sup0, l, &mut checks);
                let mut d = kernel.clone();
                for r in 1..q {
                    if early_exit && !accepted {
                        break;
                    }
                    d = d.derivative();
                    accepted &= push(format!("sup|D^{r} log f|"), d.sup_abs(), l, &mut checks);
                }
            }
        }
        ModelIndex::HaarDensity { .. } => {
            accepted &= push("sup|theta'B|".into(), kernel.sup_abs(), l, &mut checks);
            if accepted || !early_exit {
                psi = log_partition_of(&kernel);
            }
        }
        ModelIndex::SplineRegression { q, .. } => {
            let m = spec.sup_bound.unwrap_or(f64::INFINITY);
            let sup0 = kernel.sup_abs();
            accepted &= push("sup|f|<=M".into(), sup0, m, &mut checks);
            if accepted || !early_exit {
                accepted &= push("sup|f|<=L".into(), sup0, l, &mut checks);
            }
            let mut d = kernel.clone();
            for r in 1..q {
                if early_exit && !accepted {
                    break;
                }
                d = d.derivative();
                accepted &= push(format!("sup|D^{r} f|"), d.sup_abs(), l, &mut checks);
            }
        }
    }
    Evaluated {
        accepted,
        checks,
        kernel,
        psi,
    }
}

/// Whether `theta` lies in `Theta_j`, with the measured value and slack of every constraint.
pub fn check_membership(theta: &[f64], spec: &ConstraintSpec) -> Result<MembershipReport> {
    let basis = spec.index.basis()?;
    if theta.len() != basis.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.param_dim(),
            found: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("theta"));
    }
    if spec.index.family() == Family::SplineRegression && spec.sup_bound.is_none() {
        return Err(invalid("M", "regression membership needs the sup bound M"));
    }
    let ev = evaluate(spec, &basis, theta, false);
    Ok(MembershipReport {
        accepted: ev.accepted,
        checks: ev.checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn psi_examples() {
        let b = ModelBasis::Spline(SplineBasis::new(1, 1).unwrap());
        assert_eq!(psi(&b, &[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            psi(&b, &[2f64.ln(), 0.0]).unwrap(),
            1.5f64.ln(),
            epsilon = 1e-14
        );
        assert!(matches!(
            psi(&b, &[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn two_cell_density_values() {
        let d = ExpFamDensity::spline(1, 1, vec![2f64.ln(), 0.0]).unwrap();
        assert_abs_diff_eq!(d.density(0.2), 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.density(0.7), 2.0 / 3.0, epsilon = 1e-14);
        assert!(d.log_density_at(1.5).is_err());
    }

    #[test]
    fn membership_examples() {
        let spec = ConstraintSpec::new(ModelIndex::spline_density(0, 2, 1));
        let r = check_membership(&[-2.0, 2.0], &spec).unwrap();
        assert!(!r.accepted);
        let psi_closed = ((2f64).exp() - (-2f64).exp()) / 4.0;
        let expected = (2.0 + psi_closed.ln()).max((2.0 - psi_closed.ln()).abs());
        assert_abs_diff_eq!(r.checks[1].value, expected, epsilon = 1e-12);
        assert!(r.checks[1].value > 2.59);

        let spec = ConstraintSpec::new(ModelIndex::spline_density(2, 1, 1));
        assert!(!check_membership(&[1.0, 0.0, 0.0], &spec).unwrap().accepted);
        assert!(check_membership(&[0.0, 0.0, 0.0], &spec).unwrap().accepted);
        assert!(matches!(
            check_membership(&[0.0, 0.0], &spec),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_is_member_everywhere() {
        for idx in [
            ModelIndex::spline_density(3, 3, 1),
            ModelIndex::haar_density(2, 1),
            ModelIndex::spline_regression(2, 2, 1),
        ] {
            let spec = ConstraintSpec::regression(idx, 1.0);
            let theta = vec![0.0; idx.param_dim()];
            let r = check_membership(&theta, &spec).unwrap();
            assert!(r.accepted);
            assert!(r.checks.iter().all(|c| c.value.abs() < 1e-14));
        }
    }

    #[test]
    fn sampling_two_cell_mass() {
        let d = ExpFamDensity::spline(1, 1, vec![2f64.ln(), 0.0]).unwrap();
        let n = 20_000;
        let xs = d.sample_seeded(11, n);
        let p = xs.iter().filter(|&&x| x < 0.5).count() as f64 / n as f64;
        assert!((p - 2.0 / 3.0).abs() <= 4.0 * (2.0 / 9.0 / n as f64).sqrt());
    }

    #[test]
    fn uniform_sample_passes_ks() {
        let d = ExpFamDensity::spline(0, 1, vec![0.0]).unwrap();
        let xs = d.sample_seeded(5, 10_000);
        let ks = crate::stats::ks_statistic(&xs, |x| x);
        // 1% critical value 1.628 / sqrt(n).
        assert!(ks < 1.628 / 100.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spline_shift_invariance(
            theta in prop::collection::vec(-2.0f64..2.0, 5),
            c in -3.0f64..3.0,
            x in 0.0f64..=1.0,
        ) {
            let basis = ModelBasis::Spline(SplineBasis::new(2, 3).unwrap());
            let shifted: Vec<f64> = theta.iter().map(|t| t + c).collect();
            let p0 = psi(&basis, &theta).unwrap();
            let p1 = psi(&basis, &shifted).unwrap();
            prop_assert!((p1 - p0 - c).abs() < 1e-10);
            let l0 = log_density(&basis, &theta, x).unwrap();
            let l1 = log_density(&basis, &shifted, x).unwrap();
            prop_assert!((l0 - l1).abs() < 1e-10);
        }

        #[test]
        fn density_integrates_to_one(theta in prop::collection::vec(-3.0f64..3.0, 6)) {
            let d = ExpFamDensity::spline(2, 4, theta).unwrap();
            let total = crate::quadrature::integrate_breaks(d.log_poly().breaks(), 1e-13, |x| d.density(x));
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn psi_lipschitz_in_sup_norm(
            a in prop::collection::vec(-2.0f64..2.0, 4),
            b in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let basis = ModelBasis::Spline(SplineBasis::new(1, 3).unwrap());
            let ka = basis.kernel(&a).unwrap();
            let kb = basis.kernel(&b).unwrap();
            let gap = ka.sub(&kb).unwrap().sup_abs();
            let dp = (log_partition_of(&ka) - log_partition_of(&kb)).abs();
            prop_assert!(dp <= gap + 1e-12);
        }

        #[test]
        fn haar_log_density_within_twice_bound(theta in prop::collection::vec(-0.5f64..0.5, 7)) {
            let basis = ModelBasis::Haar(HaarBasis::new(2).unwrap());
            let k = basis.kernel(&theta).unwrap();
            let d = ExpFamDensity::new(basis, theta).unwrap();
            prop_assert!(d.log_poly().sup_abs() <= 2.0 * k.sup_abs() + 1e-12);
        }
    }
}
