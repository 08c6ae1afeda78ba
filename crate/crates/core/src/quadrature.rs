//! Gauss–Legendre rules and composite integration over breakpoint-aligned panels.

use std::sync::OnceLock;

/// A Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Computes the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi's initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Mapped nodes and weights for `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

const CACHED_LOG2_MAX: usize = 9;

/// Cached rule with `2^level` nodes, `level` in `0..=9`.
pub fn dyadic_rule(level: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=CACHED_LOG2_MAX)
            .map(|l| GaussRule::new(1 << l))
            .collect()
    });
    &rules[level.min(CACHED_LOG2_MAX)]
}

/// Cached rule with exactly `n` nodes for small `n` (at most 32).
pub fn small_rule(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=32).map(GaussRule::new).collect());
    &rules[n.clamp(1, 32) - 1]
}

/// Panel-doubling integration of a vector-valued integrand over one panel.
///
/// Starts at 8 nodes and doubles until every component changes by less than
/// `rel_tol` relative to its magnitude (or `abs_tol` absolutely).
pub fn integrate_panel_vec<const K: usize>(
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    mut f: impl FnMut(f64) -> [f64; K],
) -> [f64; K] {
    let eval = |level: usize, f: &mut dyn FnMut(f64) -> [f64; K]| {
        let rule = dyadic_rule(level);
        let mut acc = [0.0; K];
        for (x, w) in rule.mapped(a, b) {
            let v = f(x);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
        acc
    };
    let mut level = 3;
    let mut prev = eval(level, &mut f);
    while level < CACHED_LOG2_MAX {
        level += 1;
        let next = eval(level, &mut f);
        let converged = prev
            .iter()
            .zip(&next)
            .all(|(p, n)| (n - p).abs() <= rel_tol * n.abs() + abs_tol);
        prev = next;
        if converged {
            break;
        }
    }
    prev
}

/// Composite integral over consecutive panels `breaks[i]..breaks[i+1]`.
pub fn integrate_breaks_vec<const K: usize>(
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    mut f: impl FnMut(f64) -> [f64; K],
) -> [f64; K] {
    let mut total = [0.0; K];
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let part = integrate_panel_vec(w[0], w[1], rel_tol, abs_tol, &mut f);
        for k in 0..K {
            total[k] += part[k];
        }
    }
    total
}

/// Scalar convenience wrapper around [`integrate_breaks_vec`].
pub fn integrate_breaks(breaks: &[f64], rel_tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    integrate_breaks_vec::<1>(breaks, rel_tol, 1e-300, |x| [f(x)])[0]
}

/// Sorted union of breakpoint sets, deduplicated to within 1e-15.
pub fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.total_cmp(y));
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let rule = GaussRule::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                assert_abs_diff_eq!(got, 1.0 / (deg as f64 + 1.0), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for level in 0..=CACHED_LOG2_MAX {
            let s: f64 = dyadic_rule(level).weights.iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_integral_of_exp() {
        let got = integrate_breaks(&[0.0, 0.3, 1.0], 1e-13, f64::exp);
        assert_abs_diff_eq!(got, std::f64::consts::E - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn merge_dedups() {
        let m = merge_breaks(&[0.0, 0.5, 1.0], &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(m, vec![0.0, 0.25, 0.5, 1.0]);
    }
}
