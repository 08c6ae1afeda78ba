use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use sieve_core::basis::{
    eval_haar, gram_matrix, make_spline_knots, FunctionBasis, HaarBasis, SplineBasis,
};

/// Cox–de Boor recursion on the clamped knot vector, straight from the definition.
fn cox_de_boor(t: &[f64], i: usize, q: usize, x: f64) -> f64 {
    if q == 1 {
        let last = t[t.len() - 1];
        let inside = t[i] <= x && x < t[i + 1];
        // Right-continuous except at the end point, where the last non-empty span is closed.
        let at_end = x == last && t[i] < t[i + 1] && t[i + 1] == last;
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[i + q - 1] > t[i] {
        v += (x - t[i]) / (t[i + q - 1] - t[i]) * cox_de_boor(t, i, q - 1, x);
    }
    if t[i + q] > t[i + 1] {
        v += (t[i + q] - x) / (t[i + q] - t[i + 1]) * cox_de_boor(t, i + 1, q - 1, x);
    }
    v
}

proptest! {
    #[test]
    fn de_boor_matches_the_recursive_definition(k in 0usize..12, q in 1usize..7, x in 0.0f64..=1.0) {
        let b = SplineBasis::new(k, q).unwrap();
        let t = make_spline_knots(k, q).unwrap();
        let vals = b.eval(x).unwrap();
        for (i, v) in vals.iter().enumerate() {
            prop_assert!((v - cox_de_boor(t.knots(), i, q, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn splines_are_a_nonnegative_partition_of_unity(k in 0usize..40, q in 1usize..=16, x in 0.0f64..=1.0) {
        let vals = SplineBasis::new(k, q).unwrap().eval(x).unwrap();
        prop_assert!(vals.iter().all(|v| *v >= -1e-15));
        prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn combination_matches_the_piecewise_form(
        k in 0usize..8,
        q in 1usize..5,
        seed in proptest::collection::vec(-2.0f64..2.0, 12),
        x in 0.0f64..=1.0,
    ) {
        let b = SplineBasis::new(k, q).unwrap();
        let theta = &seed[..k + q];
        let direct: f64 = b.eval(x).unwrap().iter().zip(theta).map(|(u, v)| u * v).sum();
        prop_assert!((b.combination(theta, x).unwrap() - direct).abs() < 1e-12);
        prop_assert!((b.to_piecewise(theta).unwrap().eval(x) - direct).abs() < 1e-11);
    }
}

#[test]
fn spline_integrals_are_knot_span_over_order() {
    for (k, q) in [(0, 1), (3, 2), (5, 3), (2, 4)] {
        let b = SplineBasis::new(k, q).unwrap();
        let t = b.knots().knots().to_vec();
        for (i, int) in b.integrals().iter().enumerate() {
            assert_abs_diff_eq!(*int, (t[i + q] - t[i]) / q as f64, epsilon = 1e-14);
        }
    }
}

#[test]
fn derivative_matches_finite_differences() {
    let b = SplineBasis::new(4, 4).unwrap();
    let theta = [0.3, -1.0, 0.7, 0.2, -0.4, 1.1, 0.0, 0.5];
    let h = 1e-6;
    for x in [0.1, 0.33, 0.61, 0.9] {
        let fd = (b.combination(&theta, x + h).unwrap() - b.combination(&theta, x - h).unwrap())
            / (2.0 * h);
        assert_abs_diff_eq!(
            b.derivative_value(&theta, 1, x).unwrap(),
            fd,
            epsilon = 1e-6
        );
    }
}

#[test]
fn haar_wavelets_are_orthonormal() {
    let level = 3;
    let h = HaarBasis::new(level).unwrap();
    let cells = h.cells();
    let vals: Vec<Vec<f64>> = (0..h.wavelet_count())
        .map(|i| {
            let mut e = vec![0.0; h.wavelet_count()];
            e[i] = 1.0;
            h.cell_values(&e)
        })
        .collect();
    for a in &vals {
        // Mean zero: orthogonal to the constant.
        assert_abs_diff_eq!(a.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        for b in &vals {
            let ip: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>() / cells as f64;
            let expected = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(ip, expected, epsilon = 1e-12);
        }
    }
}

#[test]
fn haar_flat_index_round_trips_and_pointwise_values_agree() {
    for i in 1..64 {
        let (j, k) = HaarBasis::unflatten(i);
        assert_eq!(HaarBasis::flat_index(j, k), i);
    }
    // psi_{1,1} is 2^{1/2} on [1/2, 3/4) and -2^{1/2} on [3/4, 1).
    assert_abs_diff_eq!(
        eval_haar(2, 1, 1, 0.6).unwrap(),
        2f64.sqrt(),
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        eval_haar(2, 1, 1, 0.8).unwrap(),
        -(2f64.sqrt()),
        epsilon = 1e-15
    );
    assert_eq!(eval_haar(2, 1, 1, 0.2).unwrap(), 0.0);
}

#[test]
fn spline_gram_is_symmetric_positive_definite() {
    let g = gram_matrix(&SplineBasis::new(5, 3).unwrap());
    assert!((g.clone() - g.transpose()).abs().max() < 1e-15);
    assert!(g.symmetric_eigen().eigenvalues.iter().all(|&l| l > 0.0));
}

#[test]
fn points_outside_the_unit_interval_are_rejected() {
    let b = SplineBasis::new(2, 2).unwrap();
    assert!(b.eval(-0.1).is_err());
    assert!(b.eval(1.5).is_err());
    assert!(b.eval(f64::NAN).is_err());
    assert!(SplineBasis::new(1, 0).is_err());
    assert!(HaarBasis::new(99).is_err());
}
