//! Monte Carlo evidence, the posterior decomposition `U_n / V_n`, and posterior tail mass.
//!
//! Every model's integral of the likelihood ratio against Lebesgue measure on
//! `Theta_j` is estimated from weighted draws in the model's free coordinates.
//! All arithmetic stays in the log domain until the final ratio.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{FunctionBasis, SplineBasis};
use crate::error::{check_unit, invalid, Error, Result};
use crate::expfam::{evaluate, ConstraintSpec, ModelBasis};
use crate::function::{Density, UnitFunction};
use crate::piecewise::PiecewisePoly;
use crate::quadrature::{integrate_breaks_vec, merge_breaks, small_rule};
use crate::rng::derived_rng;
use crate::sieve::{ModelIndex, SieveSpec};
use crate::stats::log_sum_exp;
use crate::Family;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dataset {
    Density {
        x: Vec<f64>,
    },
    Regression {
        x: Vec<f64>,
        y: Vec<f64>,
        sigma: f64,
    },
}

impl Dataset {
    pub fn n(&self) -> usize {
        match self {
            Self::Density { x } | Self::Regression { x, .. } => x.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Density { x } => x.iter().try_for_each(|&v| check_unit(v)),
            Self::Regression { x, y, sigma } => {
                if x.len() != y.len() {
                    return Err(Error::DimensionMismatch {
                        expected: x.len(),
                        found: y.len(),
                    });
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("sigma", "must be positive and finite"));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("Y"));
                }
                x.iter().try_for_each(|&v| check_unit(v))
            }
        }
    }
}

/// The truth `f_o` used in likelihood ratios and distances.
#[derive(Clone, Copy)]
pub enum TruthRef<'a> {
    Density(&'a dyn Density),
    Regression(&'a dyn UnitFunction),
}

/// Distance used to define the neighbourhood of the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Hellinger,
    L2,
}

/// `sum_i log f(X_i)`.
pub fn log_likelihood_density(f: &dyn Density, x: &[f64]) -> f64 {
    x.iter().map(|&v| f.log_density(v)).sum()
}

/// `sum_i [-log(sqrt(2 pi) sigma) - (Y_i - f(X_i))^2 / (2 sigma^2)]`.
pub fn log_likelihood_regression(f: &dyn UnitFunction, x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let c = -0.5 * LN_2PI - sigma.ln();
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - f.value(xi);
            c - r * r / (2.0 * sigma * sigma)
        })
        .sum()
}

/// Log-likelihood of a truth (or any model function) on a dataset.
pub fn log_likelihood(model: TruthRef<'_>, data: &Dataset) -> Result<f64> {
    match (model, data) {
        (TruthRef::Density(f), Dataset::Density { x }) => Ok(log_likelihood_density(f, x)),
        (TruthRef::Regression(f), Dataset::Regression { x, y, sigma }) => {
            Ok(log_likelihood_regression(f, x, y, *sigma))
        }
        _ => Err(invalid("data", "model and data families differ")),
    }
}

/// Evidence estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Uniform draws over the bounding box.
    Uniform,
    /// Defensive mixture of uniform and a Gaussian fitted to the tempered likelihood.
    Tempered,
    /// Tempered when `n > 500`, uniform otherwise.
    #[default]
    Auto,
}

/// Monte Carlo budget and proposal settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    /// Draws per model.
    pub draws: usize,
    pub estimator: Estimator,
    /// Uniform pilot draws for the tempered proposal.
    pub pilot: usize,
    /// Likelihood tempering exponent for the Gaussian proposal (covariance divided by it).
    pub temper: f64,
    /// Mixture weight of the uniform component.
    pub defensive: f64,
    /// Draws per seeded chunk.
    pub chunk: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            draws: 20_000,
            estimator: Estimator::Auto,
            pilot: 2_000,
            temper: 0.5,
            defensive: 0.1,
            chunk: 4096,
        }
    }
}

impl McConfig {
    pub fn with_draws(draws: usize) -> Self {
        Self {
            draws,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(invalid("draws", "must be positive"));
        }
        if self.chunk == 0 {
            return Err(invalid("chunk", "must be positive"));
        }
        if !(self.temper > 0.0 && self.temper <= 1.0) {
            return Err(invalid("temper", "must lie in (0, 1]"));
        }
        if !(self.defensive > 0.0 && self.defensive <= 1.0) {
            return Err(invalid("defensive", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One weighted draw: log importance weight (likelihood ratio times measure over proposal) and distance to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub log_w: f64,
    pub distance: f64,
}

/// Monte Carlo output for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub index: ModelIndex,
    pub log_prior_weight: f64,
    /// `log int_{Theta_j} prod p_theta / p_ref d pi_j`.
    pub log_evidence_ratio: f64,
    /// Delta-method standard error of the log evidence.
    pub se_log_evidence: f64,
    pub ess: f64,
    pub accepted: usize,
    pub total: usize,
    pub estimator: Estimator,
    /// Accepted draws only; rejected draws carry zero weight.
    pub draws: Vec<Draw>,
}

impl ModelRun {
    fn summarize(&mut self) {
        let lws: Vec<f64> = self.draws.iter().map(|d| d.log_w).collect();
        let n = self.total as f64;
        let lse = log_sum_exp(&lws);
        self.log_evidence_ratio = lse - n.ln();
        if lse == f64::NEG_INFINITY {
            self.se_log_evidence = f64::INFINITY;
            self.ess = 0.0;
            return;
        }
        let lse2 = log_sum_exp(&lws.iter().map(|l| 2.0 * l).collect::<Vec<_>>());
        // Var(w) / (N mean^2) = (sum w^2 / N - mean^2) / (N mean^2)
        let ratio = (lse2 - 2.0 * lse).exp() * n; // N sum w^2 / (sum w)^2
        self.se_log_evidence = ((ratio - 1.0).max(0.0) / n).sqrt();
        self.ess = (2.0 * lse - lse2).exp();
    }
}

/// Posterior draws across all models of a sieve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub metric: Option<Metric>,
    pub models: Vec<ModelRun>,
}

/// Per-model summary inside a [`PosteriorEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvidence {
    pub index: ModelIndex,
    pub log_evidence_ratio: f64,
    pub se_log_evidence: f64,
    pub ess: f64,
    pub acceptance: f64,
    pub weight: f64,
}

/// Tail-mass estimate at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub radius: f64,
    pub metric: Option<Metric>,
    pub log_u: f64,
    pub log_v: f64,
    pub tail_mass: f64,
    pub tail_se: f64,
    pub models: Vec<ModelEvidence>,
}

impl PosteriorSample {
    fn global_log_weights(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for (j, m) in self.models.iter().enumerate() {
            let ln_n = (m.total as f64).ln();
            for d in &m.draws {
                out.push((j, m.log_prior_weight + d.log_w - ln_n, d.distance));
            }
        }
        out
    }

    /// `log V_n = log sum_j a_j E_j`.
    pub fn log_v(&self) -> f64 {
        let v: Vec<f64> = self
            .models
            .iter()
            .map(|m| m.log_prior_weight + m.log_evidence_ratio)
            .collect();
        log_sum_exp(&v)
    }

    /// Posterior model probabilities `a_j E_j / V_n`.
    pub fn model_weights(&self) -> Vec<f64> {
        let lv = self.log_v();
        self.models
            .iter()
            .map(|m| (m.log_prior_weight + m.log_evidence_ratio - lv).exp())
            .collect()
    }

    /// Posterior mass outside the ball of the given radius.
    pub fn tail_mass(&self, radius: f64) -> Result<PosteriorEstimate> {
        if self.metric.is_none() {
            return Err(invalid("truth", "tail mass needs distances to a truth"));
        }
        let all = self.global_log_weights();
        let lw: Vec<f64> = all.iter().map(|a| a.1).collect();
        let log_v = log_sum_exp(&lw);
        if log_v == f64::NEG_INFINITY {
            return Err(Error::MonteCarlo(
                "every draw was rejected; V_n is consistent with zero".into(),
            ));
        }
        let outside: Vec<f64> = all.iter().filter(|a| a.2 > radius).map(|a| a.1).collect();
        let log_u = log_sum_exp(&outside);
        let tail = if log_u == f64::NEG_INFINITY {
            0.0
        } else {
            (log_u - log_v).exp().min(1.0)
        };
        // Delta method for the ratio of two sums of independent per-model means.
        let mut var = 0.0;
        let mut pos = 0;
        for m in &self.models {
            let n = m.total as f64;
            let (mut s1, mut s2) = (0.0, 0.0);
            for &(_, l, d) in &all[pos..pos + m.draws.len()] {
                let c = (l - log_v).exp() * n;
                let e = c * (if d > radius { 1.0 } else { 0.0 } - tail);
                s1 += e;
                s2 += e * e;
            }
            pos += m.draws.len();
            let mean = s1 / n;
            var += (s2 / n - mean * mean).max(0.0) / n;
        }
        let weights = self.model_weights();
        Ok(PosteriorEstimate {
            radius,
            metric: self.metric,
            log_u,
            log_v,
            tail_mass: tail,
            tail_se: var.sqrt(),
            models: self
                .models
                .iter()
                .zip(weights)
                .map(|(m, weight)| ModelEvidence {
                    index: m.index,
                    log_evidence_ratio: m.log_evidence_ratio,
                    se_log_evidence: m.se_log_evidence,
                    ess: m.ess,
                    acceptance: m.accepted as f64 / m.total.max(1) as f64,
                    weight,
                })
                .collect(),
        })
    }

    /// Smallest draw distance `r` with posterior tail mass beyond `r` below one half.
    pub fn half_mass_radius(&self) -> f64 {
        self.distance_quantile(0.5)
    }

    /// Weighted posterior quantile of the distance to the truth.
    pub fn distance_quantile(&self, p: f64) -> f64 {
        let mut all = self.global_log_weights();
        if all.is_empty() {
            return f64::NAN;
        }
        let lv = log_sum_exp(&all.iter().map(|a| a.1).collect::<Vec<_>>());
        all.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut acc = 0.0;
        for &(_, l, d) in &all {
            acc += (l - lv).exp();
            // Mass strictly beyond d is 1 - acc.
            if 1.0 - acc < 1.0 - p {
                return d;
            }
        }
        all.last().map(|a| a.2).unwrap_or(f64::NAN)
    }

    /// Adds `c` to every log-likelihood ratio (a change of reference density).
    pub fn shifted(&self, c: f64) -> Self {
        let mut s = self.clone();
        for m in &mut s.models {
            m.log_evidence_ratio += c;
            for d in &mut m.draws {
                d.log_w += c;
            }
        }
        s
    }
}

/// Sufficient statistics for the likelihood of one model.
enum Suff {
    Density {
        s: Vec<f64>,
        n: f64,
    },
    Regression {
        g: DMatrix<f64>,
        b: DVector<f64>,
        yy: f64,
        n: f64,
        sigma: f64,
    },
}

/// Precomputed quantities for distances from model draws to the truth.
enum DistanceCache {
    /// Degree-0 model: per cell `h v^2 - 2 v i1 + i2`.
    Cells {
        widths: Vec<f64>,
        i1: Vec<f64>,
        i2: Vec<f64>,
        kind: CellKind,
    },
    /// Gauss nodes on the merged breakpoints.
    Grid {
        panel: Vec<usize>,
        x: Vec<f64>,
        w: Vec<f64>,
        target: Vec<f64>,
        kind: GridKind,
    },
}

#[derive(Clone, Copy)]
enum CellKind {
    SqrtDensity,
    Density,
    Function,
}

#[derive(Clone, Copy)]
enum GridKind {
    Hellinger,
    DensityL2,
    FunctionL2,
    GaussianHellinger { sigma: f64 },
}

const GRID_NODES: usize = 24;

impl DistanceCache {
    fn new(
        basis: &ModelBasis,
        truth: TruthRef<'_>,
        metric: Metric,
        sigma: Option<f64>,
    ) -> Result<Self> {
        let model_breaks = basis.breakpoints();
        let (truth_breaks, eval): (Vec<f64>, Box<dyn Fn(f64) -> f64 + Sync + '_>) = match truth {
            TruthRef::Density(f) => (f.breakpoints(), Box::new(move |x| f.log_density(x))),
            TruthRef::Regression(f) => (f.breakpoints(), Box::new(move |x| f.value(x))),
        };
        let is_density = matches!(truth, TruthRef::Density(_));
        let gaussian_h = !is_density && metric == Metric::Hellinger;
        if basis.degree() == 0 && !gaussian_h {
            let kind = match (is_density, metric) {
                (true, Metric::Hellinger) => CellKind::SqrtDensity,
                (true, Metric::L2) => CellKind::Density,
                _ => CellKind::Function,
            };
            let mut widths = Vec::new();
            let mut i1 = Vec::new();
            let mut i2 = Vec::new();
            for w in model_breaks.windows(2) {
                let mut sub: Vec<f64> = truth_breaks
                    .iter()
                    .copied()
                    .filter(|&b| b > w[0] && b < w[1])
                    .collect();
                sub.insert(0, w[0]);
                sub.push(w[1]);
                let [a, b] = integrate_breaks_vec::<2>(&sub, 1e-13, 1e-300, |x| {
                    let v = eval(x);
                    match kind {
                        CellKind::SqrtDensity => [(v / 2.0).exp(), v.exp()],
                        CellKind::Density => {
                            let e = v.exp();
                            [e, e * e]
                        }
                        CellKind::Function => [v, v * v],
                    }
                });
                widths.push(w[1] - w[0]);
                i1.push(a);
                i2.push(b);
            }
            return Ok(Self::Cells {
                widths,
                i1,
                i2,
                kind,
            });
        }
        let kind = match (is_density, metric) {
            (true, Metric::Hellinger) => GridKind::Hellinger,
            (true, Metric::L2) => GridKind::DensityL2,
            (false, Metric::L2) => GridKind::FunctionL2,
            (false, Metric::Hellinger) => GridKind::GaussianHellinger {
                sigma: sigma
                    .ok_or_else(|| invalid("sigma", "Gaussian Hellinger distance needs sigma"))?,
            },
        };
        let merged = merge_breaks(&model_breaks, &truth_breaks);
        let rule = small_rule(GRID_NODES);
        let probe = PiecewisePoly::step(model_breaks.clone(), vec![0.0; model_breaks.len() - 1])?;
        let (mut panel, mut xs, mut ws, mut target) = (vec![], vec![], vec![], vec![]);
        for w in merged.windows(2) {
            let p = probe.locate(0.5 * (w[0] + w[1]));
            for (x, wt) in rule.mapped(w[0], w[1]) {
                panel.push(p);
                xs.push(x);
                ws.push(wt);
                let v = eval(x);
                target.push(match kind {
                    GridKind::Hellinger => (v / 2.0).exp(),
                    GridKind::DensityL2 => v.exp(),
                    _ => v,
                });
            }
        }
        Ok(Self::Grid {
            panel,
            x: xs,
            w: ws,
            target,
            kind,
        })
    }

    /// Distance between the model function (kernel, normaliser) and the truth.
    fn distance(&self, kernel: &PiecewisePoly, psi: f64) -> f64 {
        let d2 = match self {
            Self::Cells {
                widths,
                i1,
                i2,
                kind,
            } => {
                let mut acc = 0.0;
                for c in 0..widths.len() {
                    let k = kernel.panel(c)[0];
                    let v = match kind {
                        CellKind::SqrtDensity => ((k - psi) / 2.0).exp(),
                        CellKind::Density => (k - psi).exp(),
                        CellKind::Function => k,
                    };
                    acc += widths[c] * v * v - 2.0 * v * i1[c] + i2[c];
                }
                acc
            }
            Self::Grid {
                panel,
                x,
                w,
                target,
                kind,
            } => {
                let mut acc = 0.0;
                for i in 0..x.len() {
                    let k = kernel.eval_in_panel(panel[i], x[i]);
                    let t = target[i];
                    acc += w[i]
                        * match *kind {
                            GridKind::Hellinger => {
                                let d = ((k - psi) / 2.0).exp() - t;
                                d * d
                            }
                            GridKind::DensityL2 => {
                                let d = (k - psi).exp() - t;
                                d * d
                            }
                            GridKind::FunctionL2 => (k - t) * (k - t),
                            GridKind::GaussianHellinger { sigma } => {
                                2.0 * -(-(k - t) * (k - t) / (8.0 * sigma * sigma)).exp_m1()
                            }
                        };
                }
                acc
            }
        };
        d2.max(0.0).sqrt()
    }
}

/// Bounding box in free coordinates and the map back to `theta`.
pub(crate) struct Geometry {
    family: Family,
    pub(crate) half_widths: Vec<f64>,
    /// Bound on the implied last coordinate for the zero-sum family.
    last_bound: f64,
    /// Free coordinates are `theta_0` and successive differences.
    cumulative: bool,
    /// `log` of box volume in free coordinates.
    pub(crate) log_volume: f64,
    /// `log` Jacobian from free coordinates to the intrinsic measure on `Theta_j`.
    pub(crate) log_jacobian: f64,
}

impl Geometry {
    pub(crate) fn new(index: &ModelIndex, basis: &ModelBasis, sup_bound: Option<f64>) -> Self {
        let l = index.bound();
        let free = index.free_dim();
        let (half_widths, last_bound, log_jacobian) = match (index, basis) {
            (ModelIndex::SplineDensity { .. }, ModelBasis::Spline(b)) => {
                let m = b.dim() as f64;
                let w = 2.0 * b.coefficient_bound() * l * (m - 1.0) / m;
                (vec![w; free], w, 0.5 * m.ln())
            }
            (ModelIndex::HaarDensity { .. }, _) => {
                let hw = (1..=free)
                    .map(|i| {
                        let (j, _) = crate::basis::HaarBasis::unflatten(i);
                        l * (2f64).powf(-(j as f64) / 2.0)
                    })
                    .collect();
                (hw, f64::INFINITY, 0.0)
            }
            (_, ModelBasis::Spline(b)) if b.order() >= 2 => {
                // First coefficient is f(0); the differences are scaled coefficients of D f.
                let (k, q) = (b.interior(), b.order());
                let t = b.knots().knots();
                let cb =
                    SplineBasis::new(k, q - 1).map_or(f64::INFINITY, |d| d.coefficient_bound());
                let mut hw = vec![l.min(sup_bound.unwrap_or(f64::INFINITY))];
                hw.extend((1..free).map(|i| l * cb * (t[i + q - 1] - t[i]) / (q - 1) as f64));
                (hw, f64::INFINITY, 0.0)
            }
            (_, ModelBasis::Spline(b)) => {
                let w = b.coefficient_bound() * l.min(sup_bound.unwrap_or(f64::INFINITY));
                (vec![w; free], f64::INFINITY, 0.0)
            }
            _ => unreachable!("regression models use spline bases"),
        };
        let log_volume = half_widths.iter().map(|w| (2.0 * w).ln()).sum();
        let cumulative = matches!((index, basis), (ModelIndex::SplineRegression { .. }, ModelBasis::Spline(b)) if b.order() >= 2);
        Self {
            family: index.family(),
            cumulative,
            half_widths,
            last_bound,
            log_volume,
            log_jacobian,
        }
    }

    pub(crate) fn free_dim(&self) -> usize {
        self.half_widths.len()
    }

    fn inside(&self, u: &[f64]) -> bool {
        u.iter().zip(&self.half_widths).all(|(x, w)| x.abs() <= *w)
    }

    /// Maps free coordinates to `theta`, or `None` outside the box.
    pub(crate) fn lift(&self, u: &[f64], theta: &mut Vec<f64>) -> bool {
        theta.clear();
        if self.cumulative {
            let mut acc = 0.0;
            theta.extend(u.iter().map(|d| {
                acc += d;
                acc
            }));
        } else {
            theta.extend_from_slice(u);
        }
        if self.family == Family::SplineDensity {
            let last = -u.iter().sum::<f64>();
            if last.abs() > self.last_bound {
                return false;
            }
            theta.push(last);
        }
        self.inside(u)
    }

    pub(crate) fn uniform<R: Rng + ?Sized>(&self, rng: &mut R, u: &mut [f64]) {
        for (x, w) in u.iter_mut().zip(&self.half_widths) {
            *x = (2.0 * rng.random::<f64>() - 1.0) * w;
        }
    }
}

enum Proposal {
    Uniform,
    Mixture {
        defensive: f64,
        mean: DVector<f64>,
        chol: DMatrix<f64>,
        log_norm: f64,
    },
}

impl Proposal {
    fn draw<R: Rng + ?Sized>(&self, geo: &Geometry, rng: &mut R, u: &mut [f64]) {
        match self {
            Self::Uniform => geo.uniform(rng, u),
            Self::Mixture {
                defensive,
                mean,
                chol,
                ..
            } => {
                if rng.random::<f64>() < *defensive {
                    geo.uniform(rng, u);
                } else {
                    let z = DVector::from_fn(u.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                    let v = mean + chol * z;
                    u.copy_from_slice(v.as_slice());
                }
            }
        }
    }

    /// Log proposal density at `u` (inside the box).
    fn log_density(&self, geo: &Geometry, u: &[f64]) -> f64 {
        match self {
            Self::Uniform => -geo.log_volume,
            Self::Mixture {
                defensive,
                mean,
                chol,
                log_norm,
            } => {
                let diff = DVector::from_column_slice(u) - mean;
                let z = chol
                    .solve_lower_triangular(&diff)
                    .expect("Cholesky factor is nonsingular");
                let lg = log_norm - 0.5 * z.norm_squared();
                let lu = -geo.log_volume;
                let a = defensive.ln() + lu;
                let b = (1.0 - defensive).ln() + lg;
                log_sum_exp(&[a, b])
            }
        }
    }
}

/// All state needed to draw from one model.
struct ModelSampler<'a> {
    index: ModelIndex,
    spec: ConstraintSpec,
    basis: ModelBasis,
    geo: Geometry,
    suff: Suff,
    log_ref: f64,
    distance: Option<(DistanceCache, Metric)>,
    _truth: Option<TruthRef<'a>>,
}

impl<'a> ModelSampler<'a> {
    fn new(
        spec: ConstraintSpec,
        data: &Dataset,
        truth: Option<TruthRef<'a>>,
        metric: Option<Metric>,
    ) -> Result<Self> {
        let index = spec.index;
        let basis = index.basis()?;
        let family = index.family();
        match (family.is_density(), data) {
            (true, Dataset::Density { .. }) | (false, Dataset::Regression { .. }) => {}
            _ => return Err(invalid("data", "model family and data kind differ")),
        }
        if family == Family::SplineRegression && spec.sup_bound.is_none() {
            return Err(invalid("M", "regression models need the sup bound M"));
        }
        let p = basis.param_dim();
        let mut feat = vec![0.0; p];
        let suff = match data {
            Dataset::Density { x } => {
                let mut s = vec![0.0; p];
                for &xi in x {
                    basis.features_into(xi, &mut feat);
                    for (a, b) in s.iter_mut().zip(&feat) {
                        *a += b;
                    }
                }
                Suff::Density {
                    s,
                    n: x.len() as f64,
                }
            }
            Dataset::Regression { x, y, sigma } => {
                let mut g = DMatrix::zeros(p, p);
                let mut b = DVector::zeros(p);
                for (&xi, &yi) in x.iter().zip(y) {
                    basis.features_into(xi, &mut feat);
                    let nz: Vec<usize> = (0..p).filter(|&i| feat[i] != 0.0).collect();
                    for &i in &nz {
                        b[i] += feat[i] * yi;
                        for &j in &nz {
                            g[(i, j)] += feat[i] * feat[j];
                        }
                    }
                }
                Suff::Regression {
                    g,
                    b,
                    yy: y.iter().map(|v| v * v).sum(),
                    n: x.len() as f64,
                    sigma: *sigma,
                }
            }
        };
        let log_ref = match truth {
            Some(t) => log_likelihood(t, data)?,
            None => match data {
                Dataset::Density { .. } => 0.0,
                Dataset::Regression { x, y, sigma } => {
                    log_likelihood_regression(&PiecewisePoly::constant(0.0), x, y, *sigma)
                }
            },
        };
        let sigma = match data {
            Dataset::Regression { sigma, .. } => Some(*sigma),
            _ => None,
        };
        let distance = match (truth, metric) {
            (Some(t), Some(m)) => Some((DistanceCache::new(&basis, t, m, sigma)?, m)),
            _ => None,
        };
        let geo = Geometry::new(&index, &basis, spec.sup_bound);
        Ok(Self {
            index,
            spec,
            basis,
            geo,
            suff,
            log_ref,
            distance,
            _truth: truth,
        })
    }

    /// Log-likelihood ratio against the reference for `theta` with kernel normaliser `psi`.
    fn log_lr(&self, theta: &[f64], psi: f64) -> f64 {
        match &self.suff {
            Suff::Density { s, n } => {
                let dot: f64 = theta.iter().zip(s).map(|(a, b)| a * b).sum();
                dot - n * psi - self.log_ref
            }
            Suff::Regression { g, b, yy, n, sigma } => {
                let t = DVector::from_column_slice(theta);
                let rss = yy - 2.0 * t.dot(b) + (g * &t).dot(&t);
                -n * (0.5 * LN_2PI + sigma.ln()) - rss / (2.0 * sigma * sigma) - self.log_ref
            }
        }
    }

    /// Evaluates one free-coordinate point: `Some((log_lr, distance))` when inside `Theta_j`.
    fn evaluate_point(&self, u: &[f64], theta: &mut Vec<f64>) -> Option<(f64, f64)> {
        if !self.geo.lift(u, theta) {
            return None;
        }
        let ev = evaluate(&self.spec, &self.basis, theta, true);
        if !ev.accepted {
            return None;
        }
        let lr = self.log_lr(theta, ev.psi);
        let d = self
            .distance
            .as_ref()
            .map(|(c, _)| c.distance(&ev.kernel, ev.psi))
            .unwrap_or(f64::NAN);
        Some((lr, d))
    }

    fn n(&self) -> f64 {
        match &self.suff {
            Suff::Density { n, .. } | Suff::Regression { n, .. } => *n,
        }
    }

    /// Draws `total` weighted points from `proposal` in seeded chunks.
    fn run_chunks(
        &self,
        proposal: &Proposal,
        total: usize,
        chunk: usize,
        root: u64,
        tags: &[u64],
    ) -> (Vec<Draw>, usize) {
        let chunks = total.div_ceil(chunk);
        let parts: Vec<Vec<Draw>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut t = tags.to_vec();
                t.push(c as u64);
                let mut rng = derived_rng(root, &t);
                let len = chunk.min(total - c * chunk);
                let dim = self.geo.free_dim();
                let mut u = vec![0.0; dim];
                let mut theta = Vec::with_capacity(dim + 1);
                let mut out = Vec::new();
                for _ in 0..len {
                    proposal.draw(&self.geo, &mut rng, &mut u);
                    if let Some((lr, d)) = self.evaluate_point(&u, &mut theta) {
                        let lq = proposal.log_density(&self.geo, &u);
                        out.push(Draw {
                            log_w: lr + self.geo.log_jacobian - lq,
                            distance: d,
                        });
                    }
                }
                out
            })
            .collect();
        let draws: Vec<Draw> = parts.into_iter().flatten().collect();
        let accepted = draws.len();
        (draws, accepted)
    }

    fn run(&self, log_prior_weight: f64, mc: &McConfig, root: u64, tag: u64) -> Result<ModelRun> {
        let mut run = ModelRun {
            index: self.index,
            log_prior_weight,
            log_evidence_ratio: f64::NEG_INFINITY,
            se_log_evidence: 0.0,
            ess: 0.0,
            accepted: 0,
            total: 0,
            estimator: Estimator::Uniform,
            draws: Vec::new(),
        };
        if self.geo.free_dim() == 0 {
            // Theta_j is a single point; counting measure.
            let mut theta = Vec::new();
            let (lr, d) = self.evaluate_point(&[], &mut theta).ok_or_else(|| {
                Error::MonteCarlo(format!("{} has an empty parameter set", self.index.label()))
            })?;
            run.draws.push(Draw {
                log_w: lr,
                distance: d,
            });
            run.accepted = 1;
            run.total = 1;
            run.summarize();
            run.se_log_evidence = 0.0;
            return Ok(run);
        }
        let want_tempered = match mc.estimator {
            Estimator::Uniform => false,
            Estimator::Tempered => true,
            Estimator::Auto => self.n() > 500.0,
        };
        let proposal = if want_tempered && self.n() > 0.0 {
            self.fit_proposal(mc, root, tag)?
        } else {
            None
        };
        run.estimator = if proposal.is_some() {
            Estimator::Tempered
        } else {
            Estimator::Uniform
        };
        let proposal = proposal.unwrap_or(Proposal::Uniform);
        let (draws, accepted) = self.run_chunks(&proposal, mc.draws, mc.chunk, root, &[tag, 1]);
        if accepted == 0 {
            return Err(Error::MonteCarlo(format!(
                "no draw of {} landed in the parameter set; the bounding box or budget is inadequate",
                self.index.label()
            )));
        }
        run.draws = draws;
        run.accepted = accepted;
        run.total = mc.draws;
        run.summarize();
        Ok(run)
    }

    /// Gaussian fit to the tempered likelihood, started from the best pilot draw.
    fn fit_proposal(&self, mc: &McConfig, root: u64, tag: u64) -> Result<Option<Proposal>> {
        let dim = self.geo.free_dim();
        // Pilot: uniform draws, keep the top 1% by likelihood.
        let chunks = mc.pilot.div_ceil(mc.chunk).max(1);
        let pilot: Vec<(f64, Vec<f64>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = derived_rng(root, &[tag, 0, c as u64]);
                let len = mc.chunk.min(mc.pilot.saturating_sub(c * mc.chunk));
                let mut u = vec![0.0; dim];
                let mut theta = Vec::new();
                let mut out = Vec::new();
                for _ in 0..len {
                    self.geo.uniform(&mut rng, &mut u);
                    if let Some((lr, _)) = self.evaluate_point(&u, &mut theta) {
                        out.push((lr, u.clone()));
                    }
                }
                out
            })
            .flatten()
            .collect();
        let mut pilot = pilot;
        pilot.sort_by(|a, b| b.0.total_cmp(&a.0));
        let top = (pilot.len() / 100).max(dim + 2).min(pilot.len());
        let start = if let Some((_, u)) = pilot.first() {
            DVector::from_column_slice(u)
        } else {
            DVector::zeros(dim)
        };
        let (mean, precision) = match self.laplace(start) {
            Some(v) => v,
            None => {
                if top < dim + 2 {
                    return Ok(None);
                }
                // Fall back to the moments of the top pilot draws.
                let pts = &pilot[..top];
                let mean = pts.iter().fold(DVector::zeros(dim), |acc, (_, u)| {
                    acc + DVector::from_column_slice(u)
                }) / top as f64;
                let mut cov = DMatrix::zeros(dim, dim);
                for (_, u) in pts {
                    let d = DVector::from_column_slice(u) - &mean;
                    cov += &d * d.transpose();
                }
                cov /= (top - 1) as f64;
                match cov.try_inverse() {
                    Some(p) => (mean, p * mc.temper),
                    None => return Ok(None),
                }
            }
        };
        let cov = match (precision * mc.temper).try_inverse() {
            Some(c) => c,
            None => return Ok(None),
        };
        // Keep the proposal no wider than the box.
        let mut cov = (&cov + cov.transpose()) * 0.5;
        for i in 0..dim {
            let cap = self.geo.half_widths[i].powi(2);
            if cov[(i, i)] > cap {
                let s = (cap / cov[(i, i)]).sqrt();
                for j in 0..dim {
                    cov[(i, j)] *= s;
                    cov[(j, i)] *= s;
                }
            }
        }
        let chol = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => return Ok(None),
        };
        let log_det: f64 = chol.diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        Ok(Some(Proposal::Mixture {
            defensive: mc.defensive,
            mean,
            chol,
            log_norm: -0.5 * (dim as f64 * LN_2PI + log_det),
        }))
    }

    /// Maximiser of the (unconstrained, box-clamped) log-likelihood and the negative Hessian there.
    fn laplace(&self, start: DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let dim = self.geo.free_dim();
        let lift_matrix = {
            let p = self.basis.param_dim();
            let mut a = DMatrix::zeros(p, dim);
            for i in 0..dim {
                if self.geo.cumulative {
                    for r in i..p {
                        a[(r, i)] = 1.0;
                    }
                } else {
                    a[(i, i)] = 1.0;
                }
            }
            if self.geo.family == Family::SplineDensity {
                for i in 0..dim {
                    a[(p - 1, i)] = -1.0;
                }
            }
            a
        };
        match &self.suff {
            Suff::Regression { g, b, sigma, .. } => {
                let s2 = sigma * sigma;
                let prec = lift_matrix.transpose() * g * &lift_matrix / s2;
                let ridge = 1e-10 * (prec.trace() / dim as f64).max(1e-300);
                let reg = &prec + DMatrix::identity(dim, dim) * ridge;
                let chol = reg.clone().cholesky()?;
                let mean = chol.solve(&(lift_matrix.transpose() * b / s2));
                let mean = self.clamp(mean);
                Some((mean, reg))
            }
            Suff::Density { s, n } => {
                let grid = self.feature_grid();
                let sv = DVector::from_column_slice(s);
                let objective = |u: &DVector<f64>| -> (f64, DVector<f64>, DMatrix<f64>) {
                    let theta = &lift_matrix * u;
                    let (psi, mean, cov) = grid.moments(theta.as_slice());
                    let val = theta.dot(&sv) - n * psi;
                    let grad = lift_matrix.transpose() * (&sv - mean * *n);
                    let hess = lift_matrix.transpose() * cov * &lift_matrix * *n;
                    (val, grad, hess)
                };
                let mut u = start;
                let (mut val, mut grad, mut hess) = objective(&u);
                for _ in 0..60 {
                    let ridge = 1e-9 * (hess.trace() / dim as f64).max(1e-12);
                    let h = &hess + DMatrix::identity(dim, dim) * ridge;
                    let step = h.cholesky()?.solve(&grad);
                    let mut t = 1.0;
                    let mut improved = false;
                    for _ in 0..40 {
                        let cand = self.clamp(&u + &step * t);
                        let (v2, g2, h2) = objective(&cand);
                        if v2 >= val - 1e-12 * val.abs() {
                            improved = (&cand - &u).amax() > 1e-12;
                            u = cand;
                            val = v2;
                            grad = g2;
                            hess = h2;
                            break;
                        }
                        t *= 0.5;
                    }
                    if !improved || (&step * t).amax() < 1e-10 {
                        break;
                    }
                }
                let ridge = 1e-9 * (hess.trace() / dim as f64).max(1e-12);
                let h = &hess + DMatrix::identity(dim, dim) * ridge;
                h.clone().cholesky()?;
                Some((u, h))
            }
        }
    }

    fn clamp(&self, mut u: DVector<f64>) -> DVector<f64> {
        for (x, w) in u.iter_mut().zip(&self.geo.half_widths) {
            *x = x.clamp(-w, *w);
        }
        u
    }

    fn feature_grid(&self) -> FeatureGrid {
        let rule = small_rule(if self.basis.degree() == 0 {
            1
        } else {
            GRID_NODES
        });
        let p = self.basis.param_dim();
        let mut x = Vec::new();
        let mut w = Vec::new();
        let mut feats = Vec::new();
        let mut f = vec![0.0; p];
        for b in self.basis.breakpoints().windows(2) {
            for (xi, wi) in rule.mapped(b[0], b[1]) {
                x.push(xi);
                w.push(wi);
                self.basis.features_into(xi, &mut f);
                feats.extend_from_slice(&f);
            }
        }
        FeatureGrid {
            w,
            features: DMatrix::from_row_slice(x.len(), p, &feats),
        }
    }
}

/// Basis features on a quadrature grid, for exponential-family moments.
struct FeatureGrid {
    w: Vec<f64>,
    features: DMatrix<f64>,
}

impl FeatureGrid {
    /// `(psi, E_theta[B], Cov_theta[B])` on the grid.
    fn moments(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let t = DVector::from_column_slice(theta);
        let k = &self.features * t;
        let max = k.max();
        let probs: Vec<f64> = k
            .iter()
            .zip(&self.w)
            .map(|(v, w)| w * (v - max).exp())
            .collect();
        let z: f64 = probs.iter().sum();
        let p = self.features.ncols();
        let mut mean = DVector::zeros(p);
        let mut second = DMatrix::zeros(p, p);
        for (i, pi) in probs.iter().enumerate() {
            let row = self.features.row(i).transpose();
            let wi = pi / z;
            mean += &row * wi;
            second += &row * row.transpose() * wi;
        }
        let cov = second - &mean * mean.transpose();
        (max + z.ln(), mean, cov)
    }
}

fn constraint_for(spec: &SieveSpec, index: ModelIndex) -> ConstraintSpec {
    match spec.regression() {
        Some(p) if index.family() == Family::SplineRegression => {
            ConstraintSpec::regression(index, p.sup_bound)
        }
        _ => ConstraintSpec::new(index),
    }
}

/// `(log int_{Theta_j} prod p_theta(Z_i) d pi_j, standard error)` with Lebesgue `pi_j`.
pub fn model_evidence(
    spec: &ConstraintSpec,
    data: &Dataset,
    mc: &McConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    data.validate()?;
    mc.validate()?;
    let sampler = ModelSampler::new(*spec, data, None, None)?;
    let run = sampler.run(0.0, mc, seed, 0)?;
    Ok((
        run.log_evidence_ratio + sampler.log_ref,
        run.se_log_evidence,
    ))
}

/// Weighted posterior draws over every model of the sieve.
pub fn posterior_sample(
    spec: &SieveSpec,
    data: &Dataset,
    truth: Option<TruthRef<'_>>,
    metric: Metric,
    mc: &McConfig,
    seed: u64,
) -> Result<PosteriorSample> {
    data.validate()?;
    mc.validate()?;
    let metric_opt = truth.map(|_| metric);
    let models: Vec<ModelRun> = spec
        .models
        .par_iter()
        .enumerate()
        .map(|(pos, m)| {
            let sampler =
                ModelSampler::new(constraint_for(spec, m.index), data, truth, metric_opt)?;
            sampler.run(m.constants.log_a, mc, seed, pos as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSample {
        metric: metric_opt,
        models,
    })
}

/// Posterior probability of the complement of the `radius`-ball around the truth.
pub fn posterior_tail_mass(
    spec: &SieveSpec,
    data: &Dataset,
    truth: TruthRef<'_>,
    radius: f64,
    metric: Metric,
    mc: &McConfig,
    seed: u64,
) -> Result<PosteriorEstimate> {
    posterior_sample(spec, data, Some(truth), metric, mc, seed)?.tail_mass(radius)
}

/// Posterior model probabilities `a_j E_j / sum a_j' E_j'`.
pub fn model_posterior(
    spec: &SieveSpec,
    data: &Dataset,
    mc: &McConfig,
    seed: u64,
) -> Result<Vec<(ModelIndex, f64)>> {
    let s = posterior_sample(spec, data, None, Metric::Hellinger, mc, seed)?;
    Ok(s.models
        .iter()
        .map(|m| m.index)
        .zip(s.model_weights())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Uniform;
    use crate::sieve::{SieveConfig, Truncation};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_model_has_zero_log_likelihood() {
        let data = Dataset::Density {
            x: vec![0.1, 0.7, 0.3],
        };
        assert_eq!(
            log_likelihood(TruthRef::Density(&Uniform), &data).unwrap(),
            0.0
        );
    }

    #[test]
    fn exact_regression_fit() {
        let f = PiecewisePoly::constant(0.3);
        let x = vec![0.1, 0.5, 0.9];
        let data = Dataset::Regression {
            x,
            y: vec![0.3; 3],
            sigma: 1.0,
        };
        let ll = log_likelihood(TruthRef::Regression(&f), &data).unwrap();
        assert_abs_diff_eq!(ll, -3.0 * 0.5 * LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn point_model_evidence_is_likelihood() {
        let spec = ConstraintSpec::new(ModelIndex::spline_density(0, 1, 1));
        let data = Dataset::Density { x: vec![0.2, 0.4] };
        let (le, se) = model_evidence(&spec, &data, &McConfig::with_draws(10), 1).unwrap();
        assert_eq!(le, 0.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn no_data_evidence_is_feasible_length() {
        // Tilted model theta = (t, -t): every |t| <= 1 has |log f| <= 1 (psi = log cosh t <= t).
        let spec = ConstraintSpec::new(ModelIndex::spline_density(1, 1, 1));
        let data = Dataset::Density { x: vec![] };
        let (le, se) = model_evidence(&spec, &data, &McConfig::with_draws(20_000), 3).unwrap();
        // The feasible t solve |t| + log cosh t <= 1; measure along the hyperplane is sqrt(2) dt.
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..100 {
            let mid: f64 = 0.5 * (lo + hi);
            if mid + mid.cosh().ln() <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let exact = (2.0 * lo * 2f64.sqrt()).ln();
        assert!(
            (le - exact).abs() < 4.0 * se + 1e-12,
            "{le} vs {exact} (se {se})"
        );
    }

    #[test]
    fn tail_mass_edge_radii() {
        let spec = SieveSpec::build(SieveConfig::density(
            Family::SplineDensity,
            Truncation::spline(1, 1, 1),
        ))
        .unwrap();
        let data = Dataset::Density {
            x: vec![0.3, 0.6, 0.8],
        };
        let s = posterior_sample(
            &spec,
            &data,
            Some(TruthRef::Density(&Uniform)),
            Metric::Hellinger,
            &McConfig::with_draws(4000),
            9,
        )
        .unwrap();
        assert_eq!(s.tail_mass(2f64.sqrt()).unwrap().tail_mass, 0.0);
        let w: f64 = s.model_weights().iter().sum();
        assert_abs_diff_eq!(w, 1.0, epsilon = 1e-12);
    }
}
