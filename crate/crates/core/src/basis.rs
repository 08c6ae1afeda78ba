//! Clamped uniform B-spline bases and the Haar wavelet basis on [0, 1].

use nalgebra::{DMatrix, DVector};

use crate::error::{check_unit, invalid, Error, Result};
use crate::piecewise::PiecewisePoly;
use crate::quadrature::small_rule;

/// Largest supported spline order.
pub const MAX_ORDER: usize = 16;

/// Largest supported Haar resolution level.
pub const MAX_HAAR_LEVEL: usize = 20;

/// Interface shared by the spline and Haar bases.
pub trait FunctionBasis: Sync {
    /// Number of basis functions.
    fn dim(&self) -> usize;
    /// Polynomial degree of every basis function on each piece.
    fn degree(&self) -> usize;
    /// Distinct breakpoints, including 0 and 1.
    fn breakpoints(&self) -> Vec<f64>;
    /// Writes all basis values at `x` into `out` (length `dim()`).
    fn eval_into(&self, x: f64, out: &mut [f64]);

    fn eval(&self, x: f64) -> Result<Vec<f64>> {
        check_unit(x)?;
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        Ok(out)
    }
}

/// Knot sequence with `q` zeros, the interior knots `i / (k + 1)` and `q` ones.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    k: usize,
    q: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(k: usize, q: usize) -> Result<Self> {
        if q == 0 || q > MAX_ORDER {
            return Err(invalid(
                "q",
                format!("spline order must lie in 1..={MAX_ORDER}, got {q}"),
            ));
        }
        let mut knots = vec![0.0; q];
        knots.extend((1..=k).map(|i| i as f64 / (k + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, q));
        Ok(Self { k, q, knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn interior(&self) -> usize {
        self.k
    }

    /// Distinct knots `0, 1/(k+1), ..., 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.k + 1)
            .map(|i| i as f64 / (self.k + 1) as f64)
            .collect()
    }
}

pub fn make_spline_knots(k: usize, q: usize) -> Result<KnotVector> {
    KnotVector::new(k, q)
}

/// Normalised B-spline basis of order `q` with `k` equispaced interior knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    knots: KnotVector,
}

impl SplineBasis {
    pub fn new(k: usize, q: usize) -> Result<Self> {
        Ok(Self {
            knots: KnotVector::new(k, q)?,
        })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.knots.q
    }

    pub fn interior(&self) -> usize {
        self.knots.k
    }

    /// Knot span `s` with `t_s <= x < t_{s+1}`; `x = 1` uses the last non-empty span.
    pub fn span(&self, x: f64) -> usize {
        span_in(self.knots.knots(), self.knots.q, x)
    }

    /// The `q` possibly non-zero basis values at `x`, starting at index `span - q + 1`.
    pub fn eval_nonzero(&self, x: f64) -> (usize, [f64; MAX_ORDER]) {
        let q = self.knots.q;
        let s = self.span(x);
        let mut out = [0.0; MAX_ORDER];
        basis_funs(self.knots.knots(), q, s, x, &mut out);
        (s + 1 - q, out)
    }

    /// `sum_i theta_i B_i(x)`.
    pub fn combination(&self, theta: &[f64], x: f64) -> Result<f64> {
        self.check_theta(theta)?;
        check_unit(x)?;
        Ok(eval_spline(self.knots.knots(), self.knots.q, theta, x))
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// Value of the `r`-th derivative of `theta' B` at `x`.
    pub fn derivative_value(&self, theta: &[f64], r: usize, x: f64) -> Result<f64> {
        self.check_theta(theta)?;
        check_unit(x)?;
        let q = self.knots.q;
        if r >= q {
            return Err(Error::DerivativeOrder { r, q });
        }
        let (knots, coefs) = derivative_coefficients(self.knots.knots(), q, theta, r);
        Ok(eval_spline(knots, q - r, &coefs, x))
    }

    /// Converts `theta' B` into local power form on each knot interval.
    pub fn to_piecewise(&self, theta: &[f64]) -> Result<PiecewisePoly> {
        self.check_theta(theta)?;
        Ok(self.to_piecewise_unchecked(theta))
    }

    pub(crate) fn to_piecewise_unchecked(&self, theta: &[f64]) -> PiecewisePoly {
        let q = self.knots.q;
        let breaks = self.knots.breakpoints();
        let panels = breaks.len() - 1;
        // Derivative coefficient sequences for r = 0..q-1.
        let mut seqs: Vec<(usize, Vec<f64>)> = Vec::with_capacity(q);
        let mut cur = theta.to_vec();
        let u = self.knots.knots();
        seqs.push((0, cur.clone()));
        for r in 1..q {
            cur = derive_once(&u[r - 1..u.len() + 1 - r], q - r + 1, &cur);
            seqs.push((r, cur.clone()));
        }
        let mut coefs = Vec::with_capacity(panels * q);
        let mut scratch = [0.0; MAX_ORDER];
        let mut local = vec![0.0; q];
        for p in 0..panels {
            let a = breaks[p];
            let s = q - 1 + p;
            let mut factorial = 1.0;
            for (r, c) in &seqs {
                let r = *r;
                if r > 0 {
                    factorial *= r as f64;
                }
                let order = q - r;
                let sub = &u[r..u.len() - r];
                basis_funs(sub, order, s - r, a, &mut scratch);
                let first = s - r + 1 - order;
                let v: f64 = (0..order).map(|i| scratch[i] * c[first + i]).sum();
                local[r] = v / factorial;
            }
            coefs.extend_from_slice(&local);
        }
        PiecewisePoly::new(breaks, q - 1, coefs).expect("spline pieces are well formed")
    }

    /// Integrals of the basis functions, `(t_{i+q} - t_i) / q`.
    pub fn integrals(&self) -> Vec<f64> {
        let q = self.knots.q;
        let u = self.knots.knots();
        (0..self.dim())
            .map(|i| (u[i + q] - u[i]) / q as f64)
            .collect()
    }

    /// A constant `D` with `max_i |theta_i| <= D sup |theta' B|`.
    ///
    /// Orders one and two have `D = 1`; higher orders use the dual functionals
    /// `G^{-1} B` and bound their L1 norms numerically (with a 1% margin).
    pub fn coefficient_bound(&self) -> f64 {
        let q = self.knots.q;
        if q <= 2 {
            return 1.0;
        }
        let g = gram_matrix(self);
        let ginv = match g.try_inverse() {
            Some(m) => m,
            None => return f64::INFINITY,
        };
        let m = self.dim();
        let mut l1 = vec![0.0; m];
        let rule = small_rule(32);
        let mut b = vec![0.0; m];
        let breaks = self.breakpoints();
        for w in breaks.windows(2) {
            // Sub-panels so that sign changes of the dual functionals are resolved.
            let sub = 8;
            for j in 0..sub {
                let a = w[0] + (w[1] - w[0]) * j as f64 / sub as f64;
                let bb = w[0] + (w[1] - w[0]) * (j + 1) as f64 / sub as f64;
                for (x, wt) in rule.mapped(a, bb) {
                    self.eval_into(x, &mut b);
                    let bv = DVector::from_column_slice(&b);
                    let dual = &ginv * bv;
                    for i in 0..m {
                        l1[i] += wt * dual[i].abs();
                    }
                }
            }
        }
        1.01 * l1.into_iter().fold(1.0, f64::max)
    }
}

impl FunctionBasis for SplineBasis {
    fn dim(&self) -> usize {
        self.knots.k + self.knots.q
    }

    fn degree(&self) -> usize {
        self.knots.q - 1
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.breakpoints()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (first, vals) = self.eval_nonzero(x);
        out[first..first + self.knots.q].copy_from_slice(&vals[..self.knots.q]);
    }
}

fn span_in(u: &[f64], q: usize, x: f64) -> usize {
    let m = u.len() - q;
    let idx = u.partition_point(|&t| t <= x);
    idx.saturating_sub(1).clamp(q - 1, m - 1)
}

/// Cox–de Boor triangle for the `q` non-zero basis functions on span `s`.
fn basis_funs(u: &[f64], q: usize, s: usize, x: f64, out: &mut [f64; MAX_ORDER]) {
    let p = q - 1;
    let mut left = [0.0; MAX_ORDER];
    let mut right = [0.0; MAX_ORDER];
    out[0] = 1.0;
    for j in 1..=p {
        left[j] = x - u[s + 1 - j];
        right[j] = u[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

fn eval_spline(u: &[f64], q: usize, coefs: &[f64], x: f64) -> f64 {
    let s = span_in(u, q, x);
    let mut vals = [0.0; MAX_ORDER];
    basis_funs(u, q, s, x, &mut vals);
    let first = s + 1 - q;
    (0..q).map(|i| vals[i] * coefs[first + i]).sum()
}

/// Coefficients of the derivative of an order-`q` spline on knots `u`
/// (the result lives on `u[1..len-1]` with order `q - 1`).
fn derive_once(u: &[f64], q: usize, c: &[f64]) -> Vec<f64> {
    (0..c.len() - 1)
        .map(|i| {
            let den = u[i + q] - u[i + 1];
            if den > 0.0 {
                (q - 1) as f64 * (c[i + 1] - c[i]) / den
            } else {
                0.0
            }
        })
        .collect()
}

fn derivative_coefficients<'a>(
    u: &'a [f64],
    q: usize,
    theta: &[f64],
    r: usize,
) -> (&'a [f64], Vec<f64>) {
    let mut c = theta.to_vec();
    for j in 1..=r {
        c = derive_once(&u[j - 1..u.len() + 1 - j], q - j + 1, &c);
    }
    (&u[r..u.len() - r], c)
}

/// `r`-th derivative of `theta' B` at `x` for the basis of `(k, q)`.
pub fn spline_derivative_values(
    basis: &SplineBasis,
    theta: &[f64],
    r: usize,
    x: f64,
) -> Result<f64> {
    basis.derivative_value(theta, r, x)
}

/// Haar system: the constant function plus `psi_{j,k}` for `0 <= j <= level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarBasis {
    level: usize,
}

impl HaarBasis {
    pub fn new(level: usize) -> Result<Self> {
        if level > MAX_HAAR_LEVEL {
            return Err(invalid(
                "level",
                format!("must be at most {MAX_HAAR_LEVEL}"),
            ));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of dyadic cells on which the basis is constant, `2^(level+1)`.
    pub fn cells(&self) -> usize {
        1 << (self.level + 1)
    }

    pub fn wavelet_count(&self) -> usize {
        self.cells() - 1
    }

    /// Position of `psi_{j,k}` among all basis functions (the constant is 0).
    pub fn flat_index(j: usize, k: usize) -> usize {
        (1 << j) + k
    }

    pub fn unflatten(i: usize) -> (usize, usize) {
        assert!(i >= 1, "index 0 is the constant function");
        let j = (usize::BITS - 1 - i.leading_zeros()) as usize;
        (j, i - (1 << j))
    }

    pub fn cell_of(&self, x: f64) -> usize {
        let c = self.cells();
        ((x * c as f64).floor() as usize).min(c - 1)
    }

    /// Value of `psi_{j,k}` on dyadic cell `cell`.
    pub fn wavelet_on_cell(&self, j: usize, k: usize, cell: usize) -> f64 {
        let idx = cell >> (self.level - j);
        if idx / 2 != k {
            return 0.0;
        }
        let amp = (2f64).powf(j as f64 / 2.0);
        if idx % 2 == 0 {
            amp
        } else {
            -amp
        }
    }

    /// Piecewise-constant representation of `sum theta_{j,k} psi_{j,k}`
    /// (wavelet coefficients only, flat order).
    pub fn to_piecewise(&self, theta: &[f64]) -> Result<PiecewisePoly> {
        if theta.len() != self.wavelet_count() {
            return Err(Error::DimensionMismatch {
                expected: self.wavelet_count(),
                found: theta.len(),
            });
        }
        Ok(PiecewisePoly::step(self.breakpoints(), self.cell_values(theta)).expect("dyadic cells"))
    }

    /// Cell values of `sum theta_{j,k} psi_{j,k}` by the inverse fast Haar transform.
    pub fn cell_values(&self, theta: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.cells()];
        for (i, &t) in theta.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let (j, k) = Self::unflatten(i + 1);
            let amp = t * (2f64).powf(j as f64 / 2.0);
            let width = 1 << (self.level - j);
            let start = 2 * k * width;
            for c in &mut vals[start..start + width] {
                *c += amp;
            }
            for c in &mut vals[start + width..start + 2 * width] {
                *c -= amp;
            }
        }
        vals
    }
}

impl FunctionBasis for HaarBasis {
    fn dim(&self) -> usize {
        self.cells()
    }

    fn degree(&self) -> usize {
        0
    }

    fn breakpoints(&self) -> Vec<f64> {
        let c = self.cells();
        (0..=c).map(|i| i as f64 / c as f64).collect()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        let cell = self.cell_of(x);
        out[0] = 1.0;
        for (i, v) in out.iter_mut().enumerate().skip(1) {
            let (j, k) = Self::unflatten(i);
            *v = self.wavelet_on_cell(j, k, cell);
        }
    }
}

/// Value of `psi_{j,k}(x)` for the Haar system truncated at `level`.
pub fn eval_haar(level: usize, j: usize, k: usize, x: f64) -> Result<f64> {
    check_unit(x)?;
    if j > level || k >= (1 << j) {
        return Err(invalid(
            "(j, k)",
            format!("({j}, {k}) is not a wavelet index at level {level}"),
        ));
    }
    let b = HaarBasis::new(level)?;
    Ok(b.wavelet_on_cell(j, k, b.cell_of(x)))
}

/// Gram matrix `int B_i B_j` by per-panel Gauss–Legendre quadrature, exact for piecewise polynomials.
pub fn gram_matrix<B: FunctionBasis + ?Sized>(basis: &B) -> DMatrix<f64> {
    let m = basis.dim();
    let mut g = DMatrix::zeros(m, m);
    let rule = small_rule(basis.degree() + 1);
    let mut b = vec![0.0; m];
    let breaks = basis.breakpoints();
    for w in breaks.windows(2) {
        for (x, wt) in rule.mapped(w[0], w[1]) {
            basis.eval_into(x, &mut b);
            let nz: Vec<usize> = (0..m).filter(|&i| b[i] != 0.0).collect();
            for &i in &nz {
                for &j in &nz {
                    g[(i, j)] += wt * b[i] * b[j];
                }
            }
        }
    }
    g
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    g.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn knots_are_clamped_uniform() {
        let kv = make_spline_knots(3, 2).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0]);
        assert!(make_spline_knots(1, 0).is_err());
    }

    #[test]
    fn order_one_is_cell_indicators() {
        let b = SplineBasis::new(3, 1).unwrap();
        assert_eq!(b.eval(0.3).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(b.eval(1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn quadratic_bernstein_values() {
        // k = 0, q = 3 is the Bernstein basis of degree two.
        let b = SplineBasis::new(0, 3).unwrap();
        let x: f64 = 0.3;
        let v = b.eval(x).unwrap();
        let expected = [(1.0 - x).powi(2), 2.0 * x * (1.0 - x), x * x];
        for (a, e) in v.iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn haar_flat_index_roundtrip() {
        for i in 1..64 {
            let (j, k) = HaarBasis::unflatten(i);
            assert_eq!(HaarBasis::flat_index(j, k), i);
        }
    }

    #[test]
    fn haar_gram_is_identity() {
        let h = HaarBasis::new(3).unwrap();
        let g = gram_matrix(&h);
        let id = DMatrix::<f64>::identity(h.dim(), h.dim());
        assert!((g - id).abs().max() < 1e-12);
    }

    #[test]
    fn spline_derivative_matches_finite_difference() {
        let b = SplineBasis::new(2, 4).unwrap();
        let theta = [0.3, -1.0, 2.0, 0.5, -0.7, 1.1];
        for x in [0.1, 0.45, 0.8] {
            let h = 1e-6;
            let fd = (b.combination(&theta, x + h).unwrap()
                - b.combination(&theta, x - h).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(
                b.derivative_value(&theta, 1, x).unwrap(),
                fd,
                epsilon = 1e-6
            );
        }
        assert!(matches!(
            b.derivative_value(&theta, 4, 0.5),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    proptest! {
        #[test]
        fn partition_of_unity(k in 0usize..8, q in 1usize..6, x in 0.0f64..=1.0) {
            let b = SplineBasis::new(k, q).unwrap();
            let v = b.eval(x).unwrap();
            prop_assert!(v.iter().all(|&t| t >= -1e-15));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn piecewise_form_agrees_with_de_boor(
            k in 0usize..5, q in 1usize..5,
            seed in prop::collection::vec(-2.0f64..2.0, 10),
            x in 0.0f64..=1.0,
        ) {
            let b = SplineBasis::new(k, q).unwrap();
            let theta = &seed[..b.dim().min(10)];
            prop_assume!(theta.len() == b.dim());
            let p = b.to_piecewise(theta).unwrap();
            prop_assert!((p.eval(x) - b.combination(theta, x).unwrap()).abs() < 1e-11);
            if q >= 2 {
                let d = p.derivative();
                prop_assert!((d.eval(x) - b.derivative_value(theta, 1, x).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn gram_is_positive_definite(k in 0usize..6, q in 1usize..5) {
            let b = SplineBasis::new(k, q).unwrap();
            let g = gram_matrix(&b);
            prop_assert!(min_eigenvalue(&g) > 0.0);
            let ints = b.integrals();
            // Row sums of the Gram matrix equal the basis integrals (partition of unity).
            for i in 0..b.dim() {
                prop_assert!((g.row(i).sum() - ints[i]).abs() < 1e-12);
            }
        }
    }
}
