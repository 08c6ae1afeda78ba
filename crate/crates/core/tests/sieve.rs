use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use sieve_core::sieve::{
    enumerate_models, eta_for, gamma_for, kappa_for, log_weights, solve_gamma, spline_ratio,
    EtaMode, ModelIndex, RegressionParams, SieveConfig, SieveSpec, Truncation,
};
use sieve_core::{Error, Family};

#[test]
fn tilted_model_constants() {
    let (a, m, c) = ModelIndex::spline_density(0, 1, 1).constants();
    assert_abs_diff_eq!(a, 19.28 * 6.0 * 0.5f64.exp() + 0.06, epsilon = 1e-12);
    assert_eq!((m, c), (1, 2.0));
    // spline_ratio(1) = 1 * 3 * 1.
    assert_eq!(spline_ratio(1), 3.0);
    assert_abs_diff_eq!(spline_ratio(3), 3f64.sqrt() * 7.0 * 81.0, epsilon = 1e-9);
    let (ah, mh, ch) = ModelIndex::haar_density(2, 1).constants();
    assert_abs_diff_eq!(
        ah,
        19.28 * 2f64.powf(1.5) * 3.0 * 1f64.exp() + 0.06,
        epsilon = 1e-9
    );
    assert_eq!((mh, ch), (8, 9.0));
}

#[test]
fn density_eta_by_hand() {
    let g = solve_gamma(0.056).unwrap();
    let j = ModelIndex::spline_density(0, 1, 1);
    let (a, _, _) = j.constants();
    let w = 1.0 - 4.0 * g;
    let expected = 4.0 / w * (46.2 * a * w.sqrt() / g).ln() + 8.0 * 2.0 / w;
    assert_abs_diff_eq!(
        eta_for(&j, g, None, EtaMode::Literal).unwrap(),
        expected,
        epsilon = 1e-12
    );
    assert!(eta_for(&j, 0.3, None, EtaMode::Literal).is_err());
}

#[test]
fn regression_gamma_and_kappa() {
    let p = RegressionParams::new(0.5, 1.0).unwrap();
    let c1 = ((1.0 - (-2.0f64).exp()) / 2.0).min(2.0);
    let c2 = 2.0 * (1.0 + 2.0);
    assert_abs_diff_eq!(p.c1(), c1, epsilon = 1e-15);
    assert_abs_diff_eq!(p.c2(), c2, epsilon = 1e-15);
    let g = gamma_for(Family::SplineRegression, 0.0056, Some(&p)).unwrap();
    assert_abs_diff_eq!(
        g,
        solve_gamma(0.0056 * c2 * c1.sqrt()).unwrap(),
        epsilon = 1e-15
    );
    let k = kappa_for(Family::SplineRegression, g, Some(&p)).unwrap();
    assert_abs_diff_eq!(k, 1.0 + 2.0 + 0.0056 / 0.5, epsilon = 1e-15);
    assert!(gamma_for(Family::SplineRegression, 0.0056, None).is_err());
    let kd = kappa_for(Family::SplineDensity, 0.2, None).unwrap();
    assert_abs_diff_eq!(kd, 1.0 + 0.2 / 8.0, epsilon = 1e-15);
}

proptest! {
    #[test]
    fn gamma_solves_its_equation_and_is_increasing(t in 1e-4f64..5.0, dt in 1e-3f64..1.0) {
        let g = solve_gamma(t).unwrap();
        prop_assert!(g > 0.0 && g < 0.25);
        prop_assert!((0.13 * g / (1.0 - 4.0 * g).sqrt() - t).abs() < 1e-8 * (1.0 + t * t * t));
        prop_assert!(solve_gamma(t + dt).unwrap() > g);
    }

    #[test]
    fn log_weights_are_normalised(etas in proptest::collection::vec(0.0f64..500.0, 1..30), kappa in 0.5f64..3.0) {
        let (lw, log_alpha) = log_weights(&etas, kappa).unwrap();
        let total: f64 = lw.iter().map(|v| v.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (w, e) in lw.iter().zip(&etas) {
            prop_assert!((w - (log_alpha - kappa * e)).abs() < 1e-9);
        }
    }
}

#[test]
fn non_positive_rho_has_no_gamma() {
    assert!(matches!(solve_gamma(0.0), Err(Error::NoGammaRoot { .. })));
    assert!(matches!(solve_gamma(-1.0), Err(Error::NoGammaRoot { .. })));
    assert!(matches!(log_weights(&[], 1.0), Err(Error::EmptyModelSet)));
}

#[test]
fn enumeration_covers_the_box_lexicographically() {
    let t = Truncation::spline(3, 2, 2);
    let e = enumerate_models(Family::SplineDensity, &t).unwrap();
    assert_eq!(e.models.len(), 4 * 2 * 2);
    assert_eq!(e.models[0], ModelIndex::spline_density(0, 1, 1));
    assert_eq!(e.models[1], ModelIndex::spline_density(0, 1, 2));
    assert_eq!(
        *e.models.last().unwrap(),
        ModelIndex::spline_density(3, 2, 2)
    );
    let direct: f64 = e.models.iter().map(|j| (-j.constants().2).exp()).sum();
    assert_abs_diff_eq!(e.partial_sum, direct, epsilon = 1e-15);
    assert!(e.partial_sum < e.lattice_limit);

    let h = enumerate_models(Family::HaarDensity, &Truncation::haar(3, 2)).unwrap();
    assert_eq!(h.models.len(), 8);
    let mut bad = Truncation::spline(3, 2, 2);
    bad.q = (1, 17);
    assert!(enumerate_models(Family::SplineDensity, &bad).is_err());
    bad = Truncation::spline(3, 2, 2);
    bad.bound = (0, 2);
    assert!(enumerate_models(Family::SplineDensity, &bad).is_err());
}

#[test]
fn built_prior_is_a_probability_over_its_models() {
    let spec = SieveSpec::build(SieveConfig::density(
        Family::SplineDensity,
        Truncation::spline(4, 3, 3),
    ))
    .unwrap();
    let total: f64 = spec.models.iter().map(|m| m.constants.log_a.exp()).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(spec.gamma, solve_gamma(0.056).unwrap(), epsilon = 1e-15);
    // Weights decrease with eta.
    let mut by_eta: Vec<(f64, f64)> = spec
        .models
        .iter()
        .map(|m| (m.constants.eta, m.constants.log_a))
        .collect();
    by_eta.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(by_eta.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(spec.truncation_tail >= 0.0 && spec.truncation_tail.is_finite());

    let p = RegressionParams::new(0.5, 1.0).unwrap();
    // Models must belong to the configured family.
    assert!(SieveSpec::from_models(
        SieveConfig::regression(p, Truncation::spline(2, 2, 2)),
        vec![ModelIndex::spline_density(0, 1, 1)],
    )
    .is_err());
    assert!(SieveSpec::from_models(
        SieveConfig::regression(p, Truncation::spline(2, 2, 2)),
        vec![]
    )
    .is_err());
}
