use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use sieve_core::basis::SplineBasis;
use sieve_core::expfam::ExpFamDensity;
use sieve_core::function::{Density, Uniform, UnitFunction};
use sieve_core::metrics::{
    divergences, elementary_exp_bounds, gaussian_closed_forms, hellinger, l2_distance,
    sup_log_ratio,
};
use sieve_core::piecewise::PiecewisePoly;

/// The density `2a` on [0, 1/2) and `2 - 2a` on [1/2, 1].
fn two_step(a: f64) -> ExpFamDensity {
    ExpFamDensity::spline(1, 1, vec![(a / (1.0 - a)).ln(), 0.0]).unwrap()
}

fn spline_density(coef: &[f64], k: usize, q: usize) -> ExpFamDensity {
    ExpFamDensity::spline(k, q, coef[..k + q].to_vec()).unwrap()
}

proptest! {
    #[test]
    fn two_step_divergences_from_uniform(a in 0.05f64..0.95) {
        let (p, r) = (2.0 * a, 2.0 - 2.0 * a);
        let rep = divergences(&Uniform, &two_step(a)).unwrap();
        let h2 = 0.5 * ((1.0 - p.sqrt()).powi(2) + (1.0 - r.sqrt()).powi(2));
        let d = -0.5 * (p.ln() + r.ln());
        let v = 0.5 * (p.ln().powi(2) + r.ln().powi(2));
        let l2 = (0.5 * ((1.0 - p).powi(2) + (1.0 - r).powi(2))).sqrt();
        prop_assert!((rep.hellinger - h2.sqrt()).abs() < 1e-10);
        prop_assert!((rep.kl - d).abs() < 1e-10);
        prop_assert!((rep.v - v).abs() < 1e-10);
        prop_assert!((rep.v_centered - (v - d * d)).abs() < 1e-10);
        prop_assert!((rep.l2 - l2).abs() < 1e-10);
        prop_assert!((rep.sup_log_ratio - p.ln().abs().max(r.ln().abs())).abs() < 1e-12);
    }

    #[test]
    fn divergence_axioms_on_random_log_splines(
        c1 in proptest::collection::vec(-2.0f64..2.0, 8),
        c2 in proptest::collection::vec(-2.0f64..2.0, 8),
        k in 0usize..4,
        q in 1usize..3,
    ) {
        let f = spline_density(&c1, k, q);
        let g = spline_density(&c2, k + 1, q + 1);
        let fg = divergences(&f, &g).unwrap();
        let gf = divergences(&g, &f).unwrap();
        prop_assert!((fg.hellinger - gf.hellinger).abs() < 1e-10);
        prop_assert!((fg.sup_log_ratio - gf.sup_log_ratio).abs() < 1e-12);
        prop_assert!(fg.kl >= 0.0 && fg.v >= fg.kl * fg.kl - 1e-12);
        // d_H^2 <= D and d_H <= sqrt 2.
        prop_assert!(fg.hellinger.powi(2) <= fg.kl + 1e-10);
        prop_assert!(fg.hellinger <= 2f64.sqrt());
        prop_assert!((sup_log_ratio(&f, &g) - fg.sup_log_ratio).abs() < 1e-15);
        prop_assert!((hellinger(&f, &g) - fg.hellinger).abs() < 1e-15);
    }

    #[test]
    fn gaussian_forms_match_direct_quadrature(
        c1 in proptest::collection::vec(-1.0f64..1.0, 4),
        c2 in proptest::collection::vec(-1.0f64..1.0, 4),
        sigma in 0.1f64..2.0,
    ) {
        let f = SplineBasis::new(2, 2).unwrap().to_piecewise(&c1).unwrap();
        let g = SplineBasis::new(1, 3).unwrap().to_piecewise(&c2).unwrap();
        let gd = gaussian_closed_forms(&f, &g, sigma).unwrap();
        // Composite Simpson on a grid containing every knot (1/3, 1/2, 2/3).
        let n = 6000;
        let h = 1.0 / n as f64;
        let mut s = [0.0f64; 3];
        for i in 0..=n {
            let x = i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let d = f.value(x) - g.value(x);
            let s2 = sigma * sigma;
            s[0] += w * d * d / (2.0 * s2);
            s[1] += w * (d * d / s2 + d.powi(4) / (4.0 * s2 * s2));
            s[2] += w * 2.0 * (1.0 - (-d * d / (8.0 * s2)).exp());
        }
        let s = s.map(|v| v * h / 3.0);
        let tol = |v: f64| 1e-9 * (1.0 + v);
        prop_assert!((gd.kl - s[0]).abs() < tol(s[0]));
        prop_assert!((gd.v - s[1]).abs() < tol(s[1]));
        prop_assert!((gd.hellinger_sq - s[2]).abs() < tol(s[2]));
    }

    #[test]
    fn elementary_bounds_bracket(z in -30.0f64..30.0) {
        let (lo, mid, hi) = elementary_exp_bounds(z);
        let slack = 1e-12 * (1.0 + hi.abs());
        prop_assert!(lo <= mid + slack && mid <= hi + slack);
    }
}

#[test]
fn elementary_bounds_are_tight_at_zero() {
    assert_eq!(elementary_exp_bounds(0.0), (0.0, 0.0, 0.0));
    let (lo, mid, hi) = elementary_exp_bounds(1e-4);
    assert_abs_diff_eq!(lo / mid, 1.0, epsilon = 1e-4);
    assert_abs_diff_eq!(hi / mid, 1.0, epsilon = 1e-4);
}

#[test]
fn l2_distance_between_steps() {
    let u = PiecewisePoly::step(vec![0.0, 0.5, 1.0], vec![1.0, 0.0]).unwrap();
    let v = PiecewisePoly::constant(0.0);
    assert_abs_diff_eq!(l2_distance(&u, &v), 0.5f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn gaussian_forms_reject_bad_sigma() {
    let z = PiecewisePoly::constant(0.0);
    assert!(gaussian_closed_forms(&z, &z, 0.0).is_err());
    assert!(gaussian_closed_forms(&z, &z, f64::INFINITY).is_err());
}

#[test]
fn vanishing_density_is_reported() {
    struct Half;
    impl Density for Half {
        fn log_density(&self, x: f64) -> f64 {
            if x < 0.5 {
                2f64.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        fn breakpoints(&self) -> Vec<f64> {
            vec![0.0, 0.5, 1.0]
        }
    }
    assert!(divergences(&Uniform, &Half).is_err());
}
