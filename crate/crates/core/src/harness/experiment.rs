//! Posterior contraction sweeps over the sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truth::{make_truth, TruthSpec};
use crate::error::{invalid, Error, Result};
use crate::posterior::{posterior_sample, McConfig, Metric};
use crate::rng::{derive_seed, rng_from};
use crate::sieve::{ModelIndex, SieveConfig, SieveSpec};
use crate::stats::{linear_fit, median, t_quantile_975};

/// Radius as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum RadiusRule {
    /// `c n^{-exponent}`
    Power { c: f64, exponent: f64 },
    /// `c n^{-exponent} (log n)^{1/2}`
    PowerLog { c: f64, exponent: f64 },
    /// A fixed radius.
    Absolute { r: f64 },
}

impl RadiusRule {
    pub fn radius(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            Self::Power { c, exponent } => c * nf.powf(-exponent),
            Self::PowerLog { c, exponent } => c * nf.powf(-exponent) * nf.ln().sqrt(),
            Self::Absolute { r } => r,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Power { c, exponent } | Self::PowerLog { c, exponent } => {
                c > 0.0 && exponent.is_finite()
            }
            Self::Absolute { r } => r >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("radii", format!("invalid radius rule {self:?}")))
        }
    }
}

/// A contraction experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionConfig {
    pub truth: TruthSpec,
    pub sieve: SieveConfig,
    pub n_grid: Vec<usize>,
    pub radii: Vec<RadiusRule>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub mc: McConfig,
    /// Defaults to Hellinger for densities and L2 for regression.
    #[serde(default)]
    pub metric: Option<Metric>,
}

impl ContractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(invalid(
                "n_grid",
                "must be a nonempty list of positive sample sizes",
            ));
        }
        if self.radii.is_empty() {
            return Err(invalid("radii", "needs at least one radius rule"));
        }
        self.radii.iter().try_for_each(RadiusRule::validate)?;
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be positive"));
        }
        let density_truth = !matches!(self.truth, TruthSpec::Regression { .. });
        if density_truth != self.sieve.family.is_density() {
            return Err(invalid("truth", "truth kind and sieve family differ"));
        }
        Ok(())
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(if self.sieve.family.is_density() {
            Metric::Hellinger
        } else {
            Metric::L2
        })
    }
}

/// One `(n, replicate, radius)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub replicate: usize,
    pub rule: usize,
    pub radius: f64,
    pub tail_mass: f64,
    pub tail_se: f64,
    pub log_u: f64,
    pub log_v: f64,
}

/// Per-replicate posterior summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub n: usize,
    pub replicate: usize,
    pub data_seed: u64,
    pub mc_seed: u64,
    pub half_mass_radius: f64,
    pub model_weights: Vec<f64>,
}

/// Medians across replicates for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub radii: Vec<f64>,
    pub median_tail: Vec<f64>,
    pub median_half_mass: f64,
    pub median_model_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ContractionConfig,
    pub metric: Metric,
    pub models: Vec<ModelIndex>,
    pub rows: Vec<TailRow>,
    pub replicates: Vec<ReplicateSummary>,
    pub summary: Vec<SizeSummary>,
}

/// Data and Monte Carlo for every `(n, replicate)`, tail masses on the radius grid, and medians.
pub fn contraction_experiment(cfg: &ContractionConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let truth = make_truth(&cfg.truth)?;
    let spec = SieveSpec::build(cfg.sieve.clone())?;
    if let (Some(p), Some(s)) = (spec.regression(), truth.sigma()) {
        if (p.sigma - s).abs() > 0.0 {
            return Err(invalid("sigma", "truth noise level and sieve sigma differ"));
        }
    }
    let metric = cfg.metric();
    let cells: Vec<(usize, usize, usize)> = cfg
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..cfg.replicates).map(move |r| (ni, n, r)))
        .collect();
    let results: Vec<(Vec<TailRow>, ReplicateSummary)> = cells
        .par_iter()
        .map(|&(ni, n, r)| {
            let data_seed = derive_seed(cfg.seed, &[ni as u64, r as u64, 0]);
            let mc_seed = derive_seed(cfg.seed, &[ni as u64, r as u64, 1]);
            let data = truth.sample(n, &mut rng_from(data_seed));
            let post =
                posterior_sample(&spec, &data, Some(truth.as_ref()), metric, &cfg.mc, mc_seed)?;
            let rows = cfg
                .radii
                .iter()
                .enumerate()
                .map(|(ri, rule)| {
                    let radius = rule.radius(n);
                    let est = post.tail_mass(radius)?;
                    Ok(TailRow {
                        n,
                        replicate: r,
                        rule: ri,
                        radius,
                        tail_mass: est.tail_mass,
                        tail_se: est.tail_se,
                        log_u: est.log_u,
                        log_v: est.log_v,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                rows,
                ReplicateSummary {
                    n,
                    replicate: r,
                    data_seed,
                    mc_seed,
                    half_mass_radius: post.half_mass_radius(),
                    model_weights: post.model_weights(),
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, reps): (Vec<Vec<TailRow>>, Vec<ReplicateSummary>) = results.into_iter().unzip();
    let rows: Vec<TailRow> = rows.into_iter().flatten().collect();
    let summary = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let radii: Vec<f64> = cfg.radii.iter().map(|r| r.radius(n)).collect();
            let median_tail = (0..cfg.radii.len())
                .map(|ri| {
                    let v: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.n == n && r.rule == ri)
                        .map(|r| r.tail_mass)
                        .collect();
                    median(&v)
                })
                .collect();
            let here: Vec<&ReplicateSummary> = reps.iter().filter(|r| r.n == n).collect();
            let hm: Vec<f64> = here.iter().map(|r| r.half_mass_radius).collect();
            let median_model_weights = (0..spec.models.len())
                .map(|j| median(&here.iter().map(|r| r.model_weights[j]).collect::<Vec<_>>()))
                .collect();
            SizeSummary {
                n,
                radii,
                median_tail,
                median_half_mass: median(&hm),
                median_model_weights,
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        metric,
        models: spec.models.iter().map(|m| m.index).collect(),
        rows,
        replicates: reps,
        summary,
    })
}

/// Statistic whose decay in `n` estimates the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateStatistic {
    /// Median over replicates of the posterior median distance to the truth.
    HalfMassRadius,
    /// Smallest configured radius whose median tail mass is below one half.
    GridHalfMass,
}

/// Least-squares slope of `log statistic` against `log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub se: f64,
    /// 95% interval from the Student-t quantile.
    pub ci: (f64, f64),
    /// The statistic did not vary across `n`.
    pub degenerate: bool,
}

/// Slope of `log values` against `log ns`.
pub fn slope_of(ns: &[usize], values: &[f64]) -> Result<SlopeEstimate> {
    if ns.len() < 3 || ns.len() != values.len() {
        return Err(invalid(
            "n_grid",
            "rate slopes need at least three sample sizes",
        ));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::MonteCarlo(format!(
            "rate statistic must be positive and finite, got {values:?}"
        )));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let degenerate = y.iter().all(|v| (v - y[0]).abs() < 1e-15);
    if degenerate {
        return Ok(SlopeEstimate {
            slope: 0.0,
            se: 0.0,
            ci: (0.0, 0.0),
            degenerate,
        });
    }
    let (slope, _, se) = linear_fit(&x, &y);
    let se = if se.is_finite() { se } else { 0.0 };
    let t = t_quantile_975(ns.len() - 2);
    Ok(SlopeEstimate {
        slope,
        se,
        ci: (slope - t * se, slope + t * se),
        degenerate,
    })
}

/// Rate slope of an experiment.
pub fn rate_slope(result: &ExperimentResult, statistic: RateStatistic) -> Result<SlopeEstimate> {
    let ns: Vec<usize> = result.summary.iter().map(|s| s.n).collect();
    let values: Vec<f64> = match statistic {
        RateStatistic::HalfMassRadius => {
            result.summary.iter().map(|s| s.median_half_mass).collect()
        }
        RateStatistic::GridHalfMass => result
            .summary
            .iter()
            .map(|s| {
                s.radii
                    .iter()
                    .zip(&s.median_tail)
                    .filter(|(_, t)| **t < 0.5)
                    .map(|(r, _)| *r)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    };
    slope_of(&ns, &values)
}
