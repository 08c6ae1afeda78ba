//! Hellinger, Kullback–Leibler and related divergences, plus Gaussian-regression closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::{Density, UnitFunction};
use crate::piecewise::SUP_GRID_POINTS;
use crate::quadrature::{integrate_breaks_vec, merge_breaks};

const REL_TOL: f64 = 1e-11;
const ABS_TOL: f64 = 1e-16;

/// All divergences between a pair of densities `(f, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub hellinger: f64,
    /// `D(f || g) = int f log(f / g)`.
    pub kl: f64,
    /// `V(f || g) = int f log^2(f / g)`.
    pub v: f64,
    /// `V'(f || g) = V - D^2`, clamped at zero.
    pub v_centered: f64,
    pub l2: f64,
    pub sup_log_ratio: f64,
}

/// Divergences by Gauss quadrature on the union of both breakpoint sets.
pub fn divergences(f: &dyn Density, g: &dyn Density) -> Result<DivergenceReport> {
    let breaks = merge_breaks(&f.breakpoints(), &g.breakpoints());
    let mut bad: Option<(f64, f64)> = None;
    let [h2, kl, v, l2sq] = integrate_breaks_vec::<4>(&breaks, REL_TOL, ABS_TOL, |x| {
        let lf = f.log_density(x);
        let lg = g.log_density(x);
        if !lf.is_finite() || !lg.is_finite() {
            bad.get_or_insert((x, if lf.is_finite() { lg.exp() } else { lf.exp() }));
            return [0.0; 4];
        }
        let (df, dg) = (lf.exp(), lg.exp());
        let r = lf - lg;
        let sq = (lf / 2.0).exp() - (lg / 2.0).exp();
        [sq * sq, df * r, df * r * r, (df - dg) * (df - dg)]
    });
    if let Some((x, value)) = bad {
        return Err(Error::NonPositiveDensity { x, value });
    }
    let kl = kl.max(0.0);
    Ok(DivergenceReport {
        hellinger: h2.max(0.0).sqrt().min(std::f64::consts::SQRT_2),
        kl,
        v: v.max(0.0),
        v_centered: (v - kl * kl).max(0.0),
        l2: l2sq.max(0.0).sqrt(),
        sup_log_ratio: sup_log_ratio(f, g),
    })
}

/// `sup |log f - log g|`: exact for piecewise-polynomial log densities, otherwise a dense grid.
pub fn sup_log_ratio(f: &dyn Density, g: &dyn Density) -> f64 {
    if let (Some(pf), Some(pg)) = (f.log_piecewise(), g.log_piecewise()) {
        if let Ok(d) = pf.sub(&pg) {
            return d.sup_abs();
        }
    }
    let breaks = merge_breaks(&f.breakpoints(), &g.breakpoints());
    let n = SUP_GRID_POINTS - 1;
    let mut best = 0.0f64;
    for w in breaks.windows(2) {
        for k in 0..=n {
            let x = w[0] + (w[1] - w[0]) * k as f64 / n as f64;
            best = best.max((f.log_density(x) - g.log_density(x)).abs());
        }
    }
    best
}

/// Hellinger distance alone.
pub fn hellinger(f: &dyn Density, g: &dyn Density) -> f64 {
    let breaks = merge_breaks(&f.breakpoints(), &g.breakpoints());
    let [h2] = integrate_breaks_vec::<1>(&breaks, REL_TOL, ABS_TOL, |x| {
        let sq = (f.log_density(x) / 2.0).exp() - (g.log_density(x) / 2.0).exp();
        [sq * sq]
    });
    h2.max(0.0).sqrt().min(std::f64::consts::SQRT_2)
}

/// `sqrt(int (u - v)^2)` over [0, 1] with Lebesgue measure.
pub fn l2_distance(u: &dyn UnitFunction, v: &dyn UnitFunction) -> f64 {
    let breaks = merge_breaks(&u.breakpoints(), &v.breakpoints());
    let [s] = integrate_breaks_vec::<1>(&breaks, 1e-12, ABS_TOL, |x| {
        let d = u.value(x) - v.value(x);
        [d * d]
    });
    s.max(0.0).sqrt()
}

/// Closed-form divergences between the regression models with means `f_o` and `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDivergences {
    pub kl: f64,
    pub v: f64,
    pub hellinger_sq: f64,
}

/// `D = ||f_o - f||^2 / (2 s^2)`, `V = ||f_o - f||^2 / s^2 + int (f_o - f)^4 / (4 s^4)`,
/// `d_H^2 = 2 int (1 - exp(-(f - f_o)^2 / (8 s^2)))`, with the design measure uniform on [0, 1].
pub fn gaussian_closed_forms(
    f_o: &dyn UnitFunction,
    f: &dyn UnitFunction,
    sigma: f64,
) -> Result<GaussianDivergences> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", "must be positive and finite"));
    }
    let s2 = sigma * sigma;
    let breaks = merge_breaks(&f_o.breakpoints(), &f.breakpoints());
    let [d2, d4, h] = integrate_breaks_vec::<3>(&breaks, 1e-12, ABS_TOL, |x| {
        let d = f_o.value(x) - f.value(x);
        let d2 = d * d;
        [d2, d2 * d2, -(-d2 / (8.0 * s2)).exp_m1()]
    });
    Ok(GaussianDivergences {
        kl: d2 / (2.0 * s2),
        v: d2 / s2 + d4 / (4.0 * s2 * s2),
        hellinger_sq: 2.0 * h,
    })
}

/// The right side of `D <= (1/2) e^{sup|log f/g|} V`.
pub fn barron_sheu_bound(report: &DivergenceReport) -> f64 {
    0.5 * report.sup_log_ratio.exp() * report.v
}

/// `((z^2/2) e^{-max(-z,0)}, e^z - 1 - z, (z^2/2) e^{max(z,0)})`.
pub fn elementary_exp_bounds(z: f64) -> (f64, f64, f64) {
    let h = 0.5 * z * z;
    (
        h * (-(-z).max(0.0)).exp(),
        z.exp_m1() - z,
        h * z.max(0.0).exp(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::ExpFamDensity;
    use crate::function::Uniform;
    use crate::piecewise::PiecewisePoly;
    use approx::assert_abs_diff_eq;

    #[test]
    fn self_divergences_vanish() {
        let f = ExpFamDensity::spline(2, 3, vec![0.1, -0.3, 0.5, 0.2, -0.5]).unwrap();
        let r = divergences(&f, &f).unwrap();
        assert_eq!(r.hellinger, 0.0);
        assert_eq!(r.kl, 0.0);
        assert_eq!(r.v, 0.0);
        assert_eq!(r.sup_log_ratio, 0.0);
    }

    #[test]
    fn two_cell_closed_forms() {
        let g = ExpFamDensity::spline(1, 1, vec![2f64.ln(), 0.0]).unwrap();
        let r = divergences(&Uniform, &g).unwrap();
        let (a, b) = (4.0f64 / 3.0, 2.0f64 / 3.0);
        let h2 = 0.5 * (1.0 - a.sqrt()).powi(2) + 0.5 * (1.0 - b.sqrt()).powi(2);
        let d = -0.5 * a.ln() - 0.5 * b.ln();
        let v = 0.5 * a.ln().powi(2) + 0.5 * b.ln().powi(2);
        assert_abs_diff_eq!(r.hellinger, h2.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.kl, d, epsilon = 1e-12);
        assert_abs_diff_eq!(r.v, v, epsilon = 1e-12);
        assert_abs_diff_eq!(r.hellinger, 0.169714, epsilon = 1e-6);
        assert_abs_diff_eq!(r.kl, 0.058891, epsilon = 1e-6);
        assert_abs_diff_eq!(r.v, 0.123581, epsilon = 1e-6);
        assert!(r.v_centered <= r.v && r.kl <= r.sup_log_ratio);
    }

    #[test]
    fn l2_examples() {
        let x = PiecewisePoly::new(vec![0.0, 1.0], 1, vec![0.0, 1.0]).unwrap();
        let zero = PiecewisePoly::constant(0.0);
        assert_abs_diff_eq!(l2_distance(&x, &zero), 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            l2_distance(&PiecewisePoly::constant(0.7), &zero),
            0.7,
            epsilon = 1e-12
        );
        assert_eq!(l2_distance(&x, &x), 0.0);
    }

    #[test]
    fn constant_gap_gaussian() {
        let g = gaussian_closed_forms(
            &PiecewisePoly::constant(1.0),
            &PiecewisePoly::constant(0.0),
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(g.kl, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.v, 1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(g.hellinger_sq, 0.235006, epsilon = 1e-6);
        assert!(gaussian_closed_forms(
            &PiecewisePoly::constant(1.0),
            &PiecewisePoly::constant(0.0),
            0.0
        )
        .is_err());
    }

    #[test]
    fn elementary_inequality_on_grid() {
        for i in 0..=2000 {
            let z = -10.0 + 20.0 * i as f64 / 2000.0;
            let (lo, mid, hi) = elementary_exp_bounds(z);
            assert!(
                lo <= mid * (1.0 + 1e-12) + 1e-15 && mid <= hi * (1.0 + 1e-12) + 1e-15,
                "z = {z}"
            );
        }
    }
}
