//! Sieve prior: model lattice, per-model constants, gamma and normalised log-weights.

use serde::{Deserialize, Serialize};

use crate::basis::{HaarBasis, SplineBasis};
use crate::error::{invalid, Error, Result};
use crate::expfam::ModelBasis;
use crate::stats::log_sum_exp;
use crate::Family;

/// Default covering-ratio constant for the density families (the value consistent with gamma = 0.1975).
pub const DEFAULT_DENSITY_RHO: f64 = 0.056;
/// Covering-ratio constant appearing in the regression weights and the regression gamma equation.
pub const REGRESSION_RHO: f64 = 0.0056;

/// One model `j` of the sieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelIndex {
    SplineDensity { k: usize, q: usize, bound: u32 },
    HaarDensity { level: usize, bound: u32 },
    SplineRegression { k: usize, q: usize, bound: u32 },
}

impl ModelIndex {
    pub fn spline_density(k: usize, q: usize, bound: u32) -> Self {
        Self::SplineDensity { k, q, bound }
    }

    pub fn haar_density(level: usize, bound: u32) -> Self {
        Self::HaarDensity { level, bound }
    }

    pub fn spline_regression(k: usize, q: usize, bound: u32) -> Self {
        Self::SplineRegression { k, q, bound }
    }

    pub fn validate(&self) -> Result<()> {
        let (q, bound) = match *self {
            Self::SplineDensity { q, bound, .. } | Self::SplineRegression { q, bound, .. } => {
                (q, bound)
            }
            Self::HaarDensity { bound, .. } => (1, bound),
        };
        if q == 0 {
            return Err(invalid("q", "spline order must be at least 1"));
        }
        if bound == 0 {
            return Err(invalid("L", "bound must be at least 1"));
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        match self {
            Self::SplineDensity { .. } => Family::SplineDensity,
            Self::HaarDensity { .. } => Family::HaarDensity,
            Self::SplineRegression { .. } => Family::SplineRegression,
        }
    }

    /// The constraint level `L`.
    pub fn bound(&self) -> f64 {
        match *self {
            Self::SplineDensity { bound, .. }
            | Self::HaarDensity { bound, .. }
            | Self::SplineRegression { bound, .. } => bound as f64,
        }
    }

    /// Model dimension `m_j`: `k + q` for splines, `2^(l+1)` for Haar.
    pub fn dim(&self) -> usize {
        match *self {
            Self::SplineDensity { k, q, .. } | Self::SplineRegression { k, q, .. } => k + q,
            Self::HaarDensity { level, .. } => 1 << (level + 1),
        }
    }

    /// Length of the coefficient vector `theta`.
    pub fn param_dim(&self) -> usize {
        match self {
            Self::HaarDensity { .. } => self.dim() - 1,
            _ => self.dim(),
        }
    }

    /// Dimension of the affine hull of `Theta_j` (free coordinates).
    pub fn free_dim(&self) -> usize {
        match self {
            Self::SplineDensity { .. } | Self::HaarDensity { .. } => self.dim() - 1,
            Self::SplineRegression { .. } => self.dim(),
        }
    }

    pub fn basis(&self) -> Result<ModelBasis> {
        self.validate()?;
        Ok(match *self {
            Self::SplineDensity { k, q, .. } | Self::SplineRegression { k, q, .. } => {
                ModelBasis::Spline(SplineBasis::new(k, q)?)
            }
            Self::HaarDensity { level, .. } => ModelBasis::Haar(HaarBasis::new(level)?),
        })
    }

    /// Polynomial degree of the model functions on each piece.
    pub fn degree(&self) -> usize {
        match *self {
            Self::SplineDensity { q, .. } | Self::SplineRegression { q, .. } => q - 1,
            Self::HaarDensity { .. } => 0,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self.basis() {
            Ok(b) => b.breakpoints(),
            Err(_) => vec![0.0, 1.0],
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::SplineDensity { k, q, bound } => format!("spline-density(k={k},q={q},L={bound})"),
            Self::HaarDensity { level, bound } => format!("haar-density(l={level},L={bound})"),
            Self::SplineRegression { k, q, bound } => {
                format!("spline-regression(k={k},q={q},L={bound})")
            }
        }
    }

    /// `(A_j, m_j, C_j)`.
    pub fn constants(&self) -> (f64, usize, f64) {
        let l = self.bound();
        let m = self.dim();
        let a = match *self {
            Self::SplineDensity { q, .. } => {
                spline_ratio(q) * 19.28 * (l + 1.0) * (l / 2.0).exp() + 0.06
            }
            Self::HaarDensity { level, .. } => {
                19.28 * (2f64).powf((level + 1) as f64 / 2.0) * (2.0 * l + 1.0) * l.exp() + 0.06
            }
            Self::SplineRegression { q, .. } => 9.64 * spline_ratio(q) + 0.06,
        };
        (a, m, m as f64 + l)
    }
}

/// `sqrt(q) (2q + 1) 9^(q-1)`, the ratio `T_1 / T_2` for the normalised B-spline basis.
pub fn spline_ratio(q: usize) -> f64 {
    (q as f64).sqrt() * (2 * q + 1) as f64 * 9f64.powi(q as i32 - 1)
}

/// `T_2 = 1 / (sqrt(q) (2q + 1) 9^(q-1))`.
pub fn spline_t2(q: usize) -> f64 {
    1.0 / spline_ratio(q)
}

pub fn constants_for(index: &ModelIndex) -> (f64, usize, f64) {
    index.constants()
}

/// Per-model prior constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub a: f64,
    pub m: usize,
    pub c: f64,
    pub eta: f64,
    pub log_a: f64,
}

/// Known-noise regression parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionParams {
    pub sigma: f64,
    /// Sup bound `M` on every regression function.
    pub sup_bound: f64,
    /// Conditioning level `c_0`; `2 sigma` by default.
    pub c0: f64,
}

impl RegressionParams {
    pub fn new(sigma: f64, sup_bound: f64) -> Result<Self> {
        let p = Self {
            sigma,
            sup_bound,
            c0: 2.0 * sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be positive and finite"));
        }
        if !(self.sup_bound > 0.0 && self.sup_bound.is_finite()) {
            return Err(invalid("M", "must be positive and finite"));
        }
        if !(self.c0 > 0.0) {
            return Err(invalid("c0", "must be positive"));
        }
        Ok(())
    }

    /// `c_{1,M,sigma} = min((1 - exp(-M^2 / (2 sigma^2))) / (2 M^2), 1 / (2 sigma^2))`.
    pub fn c1(&self) -> f64 {
        let (m, s) = (self.sup_bound, self.sigma);
        (-(-m * m / (2.0 * s * s)).exp_m1() / (2.0 * m * m)).min(1.0 / (2.0 * s * s))
    }

    /// `c_{2,c_0,M} = 2 (c_0 + 2M)`.
    pub fn c2(&self) -> f64 {
        2.0 * (self.c0 + 2.0 * self.sup_bound)
    }
}

/// `c_{0,M,sigma} = (1 - exp(-M^2 / (2 sigma^2))) / (2 M^2)`, the Gaussian Hellinger lower-bound constant.
pub fn hellinger_l2_constant(sup_bound: f64, sigma: f64) -> f64 {
    -(-sup_bound * sup_bound / (2.0 * sigma * sigma)).exp_m1() / (2.0 * sup_bound * sup_bound)
}

/// Which constant enters the regression `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaMode {
    /// The literal `log(1072.5 A_j)`.
    #[default]
    Literal,
    /// `log(15.4 c_2 sqrt(c_1) sqrt(1 - 4 gamma) / gamma * A_j)`.
    General,
}

/// Solves `0.13 g / sqrt(1 - 4 g) = target` on (0, 0.25) by bisection to 1e-12.
pub fn solve_gamma(target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::NoGammaRoot { rho: target });
    }
    let g = |x: f64| 0.13 * x / (1.0 - 4.0 * x).sqrt() - target;
    let (mut lo, mut hi) = (0.0f64, 0.25f64);
    // g(0) < 0 and g -> +inf at 0.25, so a root always exists for a positive target.
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if root <= 0.0 || root >= 0.25 {
        return Err(Error::NoGammaRoot { rho: target });
    }
    Ok(root)
}

/// The constant `gamma` for a family.
///
/// Density families use `rho` directly; regression uses the fixed 0.0056 scaled by `c_2 sqrt(c_1) / 0.13`.
pub fn gamma_for(family: Family, rho: f64, regression: Option<&RegressionParams>) -> Result<f64> {
    match family {
        Family::SplineDensity | Family::HaarDensity => solve_gamma(rho),
        Family::SplineRegression => {
            let p = regression
                .ok_or_else(|| invalid("sigma", "regression family needs sigma and M"))?;
            p.validate()?;
            solve_gamma(rho * p.c2() * p.c1().sqrt())
        }
    }
}

/// `kappa` in `a_j = alpha exp(-kappa eta_j)`.
pub fn kappa_for(family: Family, gamma: f64, regression: Option<&RegressionParams>) -> Result<f64> {
    match family {
        Family::SplineDensity | Family::HaarDensity => Ok(1.0 + (1.0 - 4.0 * gamma) / 8.0),
        Family::SplineRegression => {
            let p = regression
                .ok_or_else(|| invalid("sigma", "regression family needs sigma and M"))?;
            let s = p.sigma;
            Ok(1.0 + 1.0 / (2.0 * s * s) + REGRESSION_RHO / s)
        }
    }
}

/// The covering floor `(4 m / (1 - 4 gamma)) log(46.2 A sqrt(1 - 4 gamma) / gamma)` used by density `eta`.
pub fn density_eta_floor(a: f64, m: usize, gamma: f64) -> f64 {
    let w = 1.0 - 4.0 * gamma;
    4.0 * m as f64 / w * (46.2 * a * w.sqrt() / gamma).ln()
}

/// The regression log-constant: 1072.5 literally, or the general expression.
pub fn regression_log_constant(gamma: f64, p: &RegressionParams, mode: EtaMode) -> f64 {
    match mode {
        EtaMode::Literal => 1072.5f64.ln(),
        EtaMode::General => {
            (15.4 * p.c2() * p.c1().sqrt() * (1.0 - 4.0 * gamma).sqrt() / gamma).ln()
        }
    }
}

pub fn eta_for(
    index: &ModelIndex,
    gamma: f64,
    regression: Option<&RegressionParams>,
    mode: EtaMode,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.25) {
        return Err(invalid(
            "gamma",
            format!("must lie in (0, 0.25), got {gamma}"),
        ));
    }
    let (a, m, c) = index.constants();
    let w = 1.0 - 4.0 * gamma;
    match index.family() {
        Family::SplineDensity | Family::HaarDensity => {
            Ok(density_eta_floor(a, m, gamma) + 8.0 * c / w)
        }
        Family::SplineRegression => {
            let p = regression
                .ok_or_else(|| invalid("sigma", "regression family needs sigma and M"))?;
            let c1 = p.c1();
            let log_k = regression_log_constant(gamma, p, mode);
            Ok(4.0 * m as f64 / (c1 * w) * (log_k + a.ln()) + c * (8.0 / (c1 * w)).max(1.0))
        }
    }
}

/// Normalised log-weights `-kappa eta_j - lse(-kappa eta)` and `log alpha = -lse(-kappa eta)`.
pub fn log_weights(etas: &[f64], kappa: f64) -> Result<(Vec<f64>, f64)> {
    if etas.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let raw: Vec<f64> = etas.iter().map(|e| -kappa * e).collect();
    let lse = log_sum_exp(&raw);
    Ok((raw.iter().map(|r| r - lse).collect(), -lse))
}

/// Inclusive ranges for each lattice axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub k: (usize, usize),
    pub q: (usize, usize),
    pub level: (usize, usize),
    pub bound: (u32, u32),
}

impl Truncation {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::HaarDensity => Self {
                k: (0, 0),
                q: (1, 1),
                level: (0, 7),
                bound: (1, 5),
            },
            _ => Self {
                k: (0, 40),
                q: (1, 4),
                level: (0, 0),
                bound: (1, 5),
            },
        }
    }

    /// Spline lattice `0 <= k <= kmax`, `1 <= q <= qmax`, `1 <= L <= lmax`.
    pub fn spline(kmax: usize, qmax: usize, lmax: u32) -> Self {
        Self {
            k: (0, kmax),
            q: (1, qmax),
            level: (0, 0),
            bound: (1, lmax),
        }
    }

    /// Haar lattice `0 <= l <= level_max`, `1 <= L <= lmax`.
    pub fn haar(level_max: usize, lmax: u32) -> Self {
        Self {
            k: (0, 0),
            q: (1, 1),
            level: (0, level_max),
            bound: (1, lmax),
        }
    }

    pub fn validate(&self, family: Family) -> Result<()> {
        if self.bound.0 < 1 || self.bound.1 < self.bound.0 {
            return Err(invalid("L", "bounds must satisfy 1 <= Lmin <= Lmax"));
        }
        match family {
            Family::HaarDensity => {
                if self.level.1 < self.level.0 || self.level.1 > crate::basis::MAX_HAAR_LEVEL {
                    return Err(invalid("l", "level range is empty or too large"));
                }
            }
            _ => {
                if self.q.0 < 1 || self.q.1 < self.q.0 || self.q.1 > crate::basis::MAX_ORDER {
                    return Err(invalid(
                        "q",
                        "order range must satisfy 1 <= qmin <= qmax <= 16",
                    ));
                }
                if self.k.1 < self.k.0 {
                    return Err(invalid("k", "knot range is empty"));
                }
            }
        }
        Ok(())
    }
}

/// Enumerated lattice with its summability diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub models: Vec<ModelIndex>,
    /// `sum_j exp(-C_j)` over the enumerated models.
    pub partial_sum: f64,
    /// The same sum over the untruncated lattice.
    pub lattice_limit: f64,
}

/// Deterministic lexicographic enumeration of the truncated lattice.
pub fn enumerate_models(family: Family, t: &Truncation) -> Result<Enumeration> {
    t.validate(family)?;
    let mut models = Vec::new();
    match family {
        Family::HaarDensity => {
            for level in t.level.0..=t.level.1 {
                for bound in t.bound.0..=t.bound.1 {
                    models.push(ModelIndex::HaarDensity { level, bound });
                }
            }
        }
        _ => {
            for k in t.k.0..=t.k.1 {
                for q in t.q.0..=t.q.1 {
                    for bound in t.bound.0..=t.bound.1 {
                        models.push(match family {
                            Family::SplineDensity => ModelIndex::SplineDensity { k, q, bound },
                            _ => ModelIndex::SplineRegression { k, q, bound },
                        });
                    }
                }
            }
        }
    }
    // Accumulate smallest terms first.
    let mut terms: Vec<f64> = models.iter().map(|j| (-j.constants().2).exp()).collect();
    terms.sort_by(|a, b| a.total_cmp(b));
    let partial_sum = terms.iter().sum();
    Ok(Enumeration {
        models,
        partial_sum,
        lattice_limit: lattice_limit(family, 1.0),
    })
}

/// `sum_j exp(-lambda C_j)` over the full lattice of a family.
pub fn lattice_limit(family: Family, lambda: f64) -> f64 {
    let x = (-lambda).exp();
    match family {
        Family::HaarDensity => haar_level_sum(lambda, 0, 62) * x / (1.0 - x),
        _ => x * x / (1.0 - x).powi(3),
    }
}

fn haar_level_sum(rate: f64, from: usize, to: usize) -> f64 {
    (from..=to.min(62))
        .map(|l| (-rate * (1u64 << (l + 1)) as f64).exp())
        .sum()
}

/// `log sum_{n >= origin} exp(-rate n)`.
fn log_geometric(rate: f64, origin: usize) -> f64 {
    -rate * origin as f64 - (-(-rate).exp()).ln_1p()
}

/// Log-fraction of a geometric axis starting at `origin` retained by the range `[a, b]`.
fn log_kept(rate: f64, origin: usize, a: usize, b: usize) -> f64 {
    -rate * (a - origin) as f64 + (-(-rate * (b - a + 1) as f64).exp()).ln_1p()
}

/// Log of an upper bound on `sum_{excluded j} exp(-kappa eta_j)`, using
/// `kappa eta_j >= dim_rate * m_j + bound_rate * L`.
fn log_excluded_tail(family: Family, t: &Truncation, dim_rate: f64, bound_rate: f64) -> f64 {
    let (log_full, log_kept_all) = match family {
        Family::HaarDensity => {
            // Sum over levels in log domain, relative to the first term.
            let level_terms = |from: usize, to: usize| {
                let v: Vec<f64> = (from..=to.min(62))
                    .map(|l| -dim_rate * (1u64 << (l + 1)) as f64)
                    .collect();
                log_sum_exp(&v)
            };
            let all = level_terms(0, 62);
            let kept = level_terms(t.level.0, t.level.1);
            (
                all + log_geometric(bound_rate, 1),
                (kept - all) + log_kept(bound_rate, 1, t.bound.0 as usize, t.bound.1 as usize),
            )
        }
        _ => (
            log_geometric(dim_rate, 0) + log_geometric(dim_rate, 1) + log_geometric(bound_rate, 1),
            log_kept(dim_rate, 0, t.k.0, t.k.1)
                + log_kept(dim_rate, 1, t.q.0, t.q.1)
                + log_kept(bound_rate, 1, t.bound.0 as usize, t.bound.1 as usize),
        ),
    };
    let excluded_fraction = -log_kept_all.exp_m1();
    if excluded_fraction <= 0.0 {
        f64::NEG_INFINITY
    } else {
        log_full + excluded_fraction.ln()
    }
}

/// Configuration of a sieve prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveConfig {
    pub family: Family,
    /// Covering-ratio constant; `None` selects 0.056 (density) or 0.0056 (regression).
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub regression: Option<RegressionParams>,
    pub truncation: Truncation,
    #[serde(default)]
    pub eta_mode: EtaMode,
}

impl SieveConfig {
    pub fn density(family: Family, truncation: Truncation) -> Self {
        Self {
            family,
            rho: None,
            regression: None,
            truncation,
            eta_mode: EtaMode::Literal,
        }
    }

    pub fn regression(params: RegressionParams, truncation: Truncation) -> Self {
        Self {
            family: Family::SplineRegression,
            rho: None,
            regression: Some(params),
            truncation,
            eta_mode: EtaMode::Literal,
        }
    }

    pub fn effective_rho(&self) -> f64 {
        self.rho.unwrap_or(if self.family.is_density() {
            DEFAULT_DENSITY_RHO
        } else {
            REGRESSION_RHO
        })
    }
}

/// A model together with its constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveModel {
    pub index: ModelIndex,
    pub constants: ModelConstants,
}

/// The finished prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveSpec {
    pub config: SieveConfig,
    pub rho: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub models: Vec<SieveModel>,
    pub log_alpha: f64,
    /// `sum_j exp(-C_j)` over the included models.
    pub summability: f64,
    /// Upper bound on `sum_{excluded} exp(-kappa eta_j)` relative to the included normaliser.
    pub truncation_tail: f64,
}

impl SieveSpec {
    pub fn build(config: SieveConfig) -> Result<Self> {
        let en = enumerate_models(config.family, &config.truncation)?;
        Self::assemble(config, en.models, true)
    }

    /// A prior over an explicit list of models (duplicates allowed).
    pub fn from_models(config: SieveConfig, models: Vec<ModelIndex>) -> Result<Self> {
        Self::assemble(config, models, false)
    }

    fn assemble(config: SieveConfig, models: Vec<ModelIndex>, lattice: bool) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyModelSet);
        }
        if let Some(m) = models.iter().find(|m| m.family() != config.family) {
            return Err(invalid(
                "family",
                format!("model {} does not belong to {}", m.label(), config.family),
            ));
        }
        for m in &models {
            m.validate()?;
        }
        let rho = config.effective_rho();
        let reg = config.regression.as_ref();
        let gamma = gamma_for(config.family, rho, reg)?;
        let kappa = kappa_for(config.family, gamma, reg)?;
        let etas = models
            .iter()
            .map(|j| eta_for(j, gamma, reg, config.eta_mode))
            .collect::<Result<Vec<_>>>()?;
        let (log_a, log_alpha) = log_weights(&etas, kappa)?;
        let summability = models.iter().map(|j| (-j.constants().2).exp()).sum();
        let truncation_tail = if lattice {
            let w = 1.0 - 4.0 * gamma;
            // Smallest per-dimension floor over the lattice: A_j is increasing in q and L.
            let (per_dim, per_c) = match config.family {
                Family::SplineRegression => {
                    let p = reg.expect("validated by gamma_for");
                    let a_min = ModelIndex::spline_regression(0, 1, 1).constants().0;
                    let log_k = regression_log_constant(gamma, p, config.eta_mode);
                    (
                        4.0 / (p.c1() * w) * (log_k + a_min.ln()),
                        (8.0 / (p.c1() * w)).max(1.0),
                    )
                }
                family => {
                    let a_min = match family {
                        Family::HaarDensity => ModelIndex::haar_density(0, 1),
                        _ => ModelIndex::spline_density(0, 1, 1),
                    }
                    .constants()
                    .0;
                    (density_eta_floor(a_min, 1, gamma), 8.0 / w)
                }
            };
            let log_tail = log_excluded_tail(
                config.family,
                &config.truncation,
                kappa * (per_dim + per_c),
                kappa * per_c,
            );
            // Relative to the included normaliser exp(-log_alpha).
            (log_tail + log_alpha).exp()
        } else {
            0.0
        };
        let models = models
            .into_iter()
            .zip(etas)
            .zip(log_a)
            .map(|((index, eta), log_a)| {
                let (a, m, c) = index.constants();
                SieveModel {
                    index,
                    constants: ModelConstants {
                        a,
                        m,
                        c,
                        eta,
                        log_a,
                    },
                }
            })
            .collect();
        Ok(Self {
            config,
            rho,
            gamma,
            kappa,
            models,
            log_alpha,
            summability,
            truncation_tail,
        })
    }

    pub fn family(&self) -> Family {
        self.config.family
    }

    pub fn regression(&self) -> Option<&RegressionParams> {
        self.config.regression.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spline_density_constants() {
        let (a, m, c) = ModelIndex::spline_density(0, 1, 1).constants();
        let oracle = 19.28 * 3.0 * 2.0 * 0.5f64.exp() + 0.06;
        assert_abs_diff_eq!(a, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 190.79, epsilon = 0.01);
        assert_eq!((m, c), (1, 2.0));
    }

    #[test]
    fn haar_and_regression_constants() {
        let (a, m, c) = ModelIndex::haar_density(0, 1).constants();
        assert_abs_diff_eq!(a, 222.41, epsilon = 0.01);
        assert_eq!((m, c), (2, 3.0));
        let (a, m, c) = ModelIndex::spline_regression(3, 1, 1).constants();
        assert_abs_diff_eq!(a, 28.98, epsilon = 1e-12);
        assert_eq!((m, c), (4, 5.0));
    }

    #[test]
    fn eta_examples() {
        let g = solve_gamma(0.056).unwrap();
        let e = eta_for(
            &ModelIndex::spline_density(0, 1, 1),
            g,
            None,
            EtaMode::Literal,
        )
        .unwrap();
        assert_abs_diff_eq!(e, 265.3, epsilon = 0.3);
        let e = eta_for(&ModelIndex::haar_density(0, 1), g, None, EtaMode::Literal).unwrap();
        assert_abs_diff_eq!(e, 498.3, epsilon = 0.5);
    }

    #[test]
    fn kappa_examples() {
        let g = solve_gamma(0.056).unwrap();
        let k = kappa_for(Family::SplineDensity, g, None).unwrap();
        assert_abs_diff_eq!(k, 1.0 + (1.0 - 4.0 * g) / 8.0, epsilon = 1e-15);
        let p = RegressionParams::new(1.0, 1.0).unwrap();
        let k = kappa_for(Family::SplineRegression, 0.1, Some(&p)).unwrap();
        assert_abs_diff_eq!(k, 1.5056, epsilon = 1e-12);
    }

    #[test]
    fn haar_lattice_count() {
        let en = enumerate_models(Family::HaarDensity, &Truncation::haar(2, 2)).unwrap();
        assert_eq!(en.models.len(), 6);
    }

    #[test]
    fn weights_normalise_and_decrease() {
        let spec = SieveSpec::build(SieveConfig::density(
            Family::SplineDensity,
            Truncation::spline(3, 2, 2),
        ))
        .unwrap();
        let total: f64 = spec.models.iter().map(|m| m.constants.log_a.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for a in &spec.models {
            for b in &spec.models {
                if a.constants.eta < b.constants.eta {
                    assert!(a.constants.log_a > b.constants.log_a);
                }
            }
        }
        assert!(spec.truncation_tail >= 0.0 && spec.truncation_tail < 1e-15);
    }

    #[test]
    fn empty_model_list_rejected() {
        let cfg = SieveConfig::density(Family::SplineDensity, Truncation::spline(1, 1, 1));
        assert_eq!(
            SieveSpec::from_models(cfg, vec![]),
            Err(Error::EmptyModelSet)
        );
    }
}
