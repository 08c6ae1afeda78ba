//! Piecewise polynomials on [0, 1] in local power form.

use crate::error::{invalid, Result};

/// Points per panel used by the grid fallback for sup norms of high-degree pieces.
pub const SUP_GRID_POINTS: usize = 4097;

/// A piecewise polynomial with coefficients in powers of `x - breaks[i]` on panel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    degree: usize,
    coefs: Vec<f64>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, degree: usize, coefs: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(invalid("breaks", "need at least two breakpoints"));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("breaks", "breakpoints must be strictly increasing"));
        }
        let panels = breaks.len() - 1;
        if coefs.len() != panels * (degree + 1) {
            return Err(invalid(
                "coefs",
                format!(
                    "expected {} coefficients, got {}",
                    panels * (degree + 1),
                    coefs.len()
                ),
            ));
        }
        Ok(Self {
            breaks,
            degree,
            coefs,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breaks: vec![0.0, 1.0],
            degree: 0,
            coefs: vec![value],
        }
    }

    /// Piecewise constant function with the given cell values.
    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(breaks, 0, values)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_panels(&self) -> usize {
        self.breaks.len() - 1
    }

    /// Local coefficients of panel `i`, lowest power first.
    pub fn panel(&self, i: usize) -> &[f64] {
        let w = self.degree + 1;
        &self.coefs[i * w..(i + 1) * w]
    }

    pub fn panel_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.degree + 1;
        &mut self.coefs[i * w..(i + 1) * w]
    }

    /// Panel containing `x`; the right end of the domain belongs to the last panel.
    pub fn locate(&self, x: f64) -> usize {
        let idx = self.breaks.partition_point(|&b| b <= x);
        idx.saturating_sub(1).min(self.num_panels() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.locate(x);
        horner(self.panel(i), x - self.breaks[i])
    }

    pub fn eval_in_panel(&self, i: usize, x: f64) -> f64 {
        horner(self.panel(i), x - self.breaks[i])
    }

    pub fn derivative(&self) -> Self {
        if self.degree == 0 {
            return Self {
                breaks: self.breaks.clone(),
                degree: 0,
                coefs: vec![0.0; self.num_panels()],
            };
        }
        let d = self.degree;
        let mut coefs = Vec::with_capacity(self.num_panels() * d);
        for i in 0..self.num_panels() {
            let p = self.panel(i);
            coefs.extend((1..=d).map(|j| j as f64 * p[j]));
        }
        Self {
            breaks: self.breaks.clone(),
            degree: d - 1,
            coefs,
        }
    }

    pub fn nth_derivative(&self, r: usize) -> Self {
        (0..r).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn add_constant(&mut self, c: f64) {
        let w = self.degree + 1;
        for i in 0..self.num_panels() {
            self.coefs[i * w] += c;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.coefs.iter_mut().for_each(|c| *c *= s);
    }

    /// Re-expresses the function on a refinement of its breakpoints.
    pub fn refine(&self, breaks: &[f64]) -> Result<Self> {
        let d = self.degree;
        let mut coefs = Vec::with_capacity((breaks.len() - 1) * (d + 1));
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let i = self.locate(mid);
            let mut local = self.panel(i).to_vec();
            taylor_shift(&mut local, w[0] - self.breaks[i]);
            coefs.extend_from_slice(&local);
        }
        Self::new(breaks.to_vec(), d, coefs)
    }

    /// `self - other` on the merged breakpoints.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        let breaks = crate::quadrature::merge_breaks(&self.breaks, &other.breaks);
        let a = self.refine(&breaks)?;
        let b = other.refine(&breaks)?;
        let d = a.degree.max(b.degree);
        let mut coefs = vec![0.0; (breaks.len() - 1) * (d + 1)];
        for i in 0..breaks.len() - 1 {
            let dst = &mut coefs[i * (d + 1)..(i + 1) * (d + 1)];
            for (j, c) in a.panel(i).iter().enumerate() {
                dst[j] += c;
            }
            for (j, c) in b.panel(i).iter().enumerate() {
                dst[j] -= c;
            }
        }
        Self::new(breaks, d, coefs)
    }

    /// Extremes of the function over panel `i` (min, max).
    pub fn panel_range(&self, i: usize) -> (f64, f64) {
        let p = self.panel(i);
        let h = self.breaks[i + 1] - self.breaks[i];
        let mut lo = p[0];
        let mut hi = p[0];
        let mut visit = |t: f64| {
            let v = horner(p, t);
            lo = lo.min(v);
            hi = hi.max(v);
        };
        visit(h);
        match self.degree {
            0 | 1 => {}
            2 => {
                if p[2] != 0.0 {
                    let t = -p[1] / (2.0 * p[2]);
                    if t > 0.0 && t < h {
                        visit(t);
                    }
                }
            }
            3 => {
                // Roots of p1 + 2 p2 t + 3 p3 t^2.
                let (a, b, c) = (3.0 * p[3], 2.0 * p[2], p[1]);
                for t in quadratic_roots(a, b, c) {
                    if t > 0.0 && t < h {
                        visit(t);
                    }
                }
            }
            _ => {
                let n = SUP_GRID_POINTS - 1;
                for k in 1..n {
                    visit(h * k as f64 / n as f64);
                }
            }
        }
        (lo, hi)
    }

    /// Supremum of `|p|` over [0, 1]; exact for degree at most three.
    pub fn sup_abs(&self) -> f64 {
        (0..self.num_panels())
            .map(|i| {
                let (lo, hi) = self.panel_range(i);
                lo.abs().max(hi.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Supremum of `p` over [0, 1].
    pub fn max_value(&self) -> f64 {
        (0..self.num_panels())
            .map(|i| self.panel_range(i).1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid estimate of `sup |p|` with `points` equispaced points per panel.
    pub fn sup_abs_grid(&self, points: usize) -> f64 {
        let n = points.max(2) - 1;
        let mut best = 0.0f64;
        for i in 0..self.num_panels() {
            let h = self.breaks[i + 1] - self.breaks[i];
            let p = self.panel(i);
            for k in 0..=n {
                best = best.max(horner(p, h * k as f64 / n as f64).abs());
            }
        }
        best
    }

    /// Exact integral over [0, 1].
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.num_panels() {
            let h = self.breaks[i + 1] - self.breaks[i];
            let mut hp = h;
            for (j, c) in self.panel(i).iter().enumerate() {
                total += c * hp / (j as f64 + 1.0);
                hp *= h;
            }
        }
        total
    }
}

#[inline]
pub fn horner(coefs: &[f64], t: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Rewrites `p(t)` as the coefficients of `p(t + delta)` in place.
pub fn taylor_shift(coefs: &mut [f64], delta: f64) {
    let d = coefs.len();
    if d < 2 || delta == 0.0 {
        return;
    }
    for i in 0..d - 1 {
        for j in (i..d - 1).rev() {
            coefs[j] += delta * coefs[j + 1];
        }
    }
}

/// Real roots of `a t^2 + b t + c`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let mut c = vec![1.0, -2.0, 0.5, 3.0];
        let orig = c.clone();
        taylor_shift(&mut c, 0.3);
        for t in [0.0, 0.1, 0.7] {
            assert_abs_diff_eq!(horner(&c, t), horner(&orig, t + 0.3), epsilon = 1e-13);
        }
    }

    #[test]
    fn sup_of_cubic_finds_interior_extremum() {
        // x (1 - x)(x - 0.5) on one panel: extrema at 0.5 +- sqrt(3)/6.
        let p = PiecewisePoly::new(vec![0.0, 1.0], 3, vec![0.0, -0.5, 1.5, -1.0]).unwrap();
        let t = 0.5 - 3f64.sqrt() / 6.0;
        let expected = (t * (1.0 - t) * (t - 0.5)).abs();
        assert_abs_diff_eq!(p.sup_abs(), expected, epsilon = 1e-15);
        assert!(p.sup_abs_grid(SUP_GRID_POINTS) <= p.sup_abs() + 1e-15);
    }

    #[test]
    fn locate_assigns_right_endpoint_to_last_panel() {
        let p = PiecewisePoly::step(vec![0.0, 0.5, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(p.locate(1.0), 1);
        assert_eq!(p.locate(0.5), 1);
        assert_eq!(p.locate(0.0), 0);
        assert_eq!(p.eval(0.25), 1.0);
    }

    proptest! {
        #[test]
        fn sub_is_pointwise_difference(
            a in prop::collection::vec(-3.0f64..3.0, 6),
            b in prop::collection::vec(-3.0f64..3.0, 6),
            x in 0.0f64..=1.0,
        ) {
            let p = PiecewisePoly::new(vec![0.0, 0.4, 1.0], 2, a).unwrap();
            let q = PiecewisePoly::new(vec![0.0, 0.25, 0.5, 1.0], 1, b).unwrap();
            let d = p.sub(&q).unwrap();
            prop_assert!((d.eval(x) - (p.eval(x) - q.eval(x))).abs() < 1e-12);
        }

        #[test]
        fn exact_sup_dominates_grid(c in prop::collection::vec(-5.0f64..5.0, 8)) {
            let p = PiecewisePoly::new(vec![0.0, 0.5, 1.0], 3, c).unwrap();
            prop_assert!(p.sup_abs_grid(257) <= p.sup_abs() + 1e-12);
        }
    }
}
