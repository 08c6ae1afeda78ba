//! Monte Carlo validation of the exponential tail inequalities and the evidence lower bound.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truth::sample_density;
use crate::error::{invalid, Error, Result};
use crate::expfam::{evaluate, ConstraintSpec, ExpFamDensity, ModelBasis};
use crate::function::{Density, UnitFunction};
use crate::metrics::{divergences, hellinger, l2_distance, sup_log_ratio};
use crate::posterior::{
    log_likelihood_density, model_evidence, posterior_sample, Dataset, Geometry, McConfig, Metric,
    TruthRef,
};
use crate::rng::{derive_seed, derived_rng, rng_from};
use crate::sieve::{density_eta_floor, ModelIndex, RegressionParams, SieveSpec};

/// Default number of parameter grid points for the supremum over `theta`.
pub const THETA_GRID: usize = 2048;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 0.25 {
        Ok(())
    } else {
        Err(invalid(
            "gamma",
            format!("must lie in (0, 0.25), got {gamma}"),
        ))
    }
}

/// A point of the parameter grid.
struct GridPoint {
    theta: Vec<f64>,
    psi: f64,
    /// `d_H^2(f_o, f_theta)` (density) or `||f_o - f_theta||^2` (regression).
    dist_sq: f64,
}

/// Regular grid over the bounding box of a model with at most two free coordinates, restricted
/// to the parameter set.
fn theta_grid(spec: &ConstraintSpec, points: usize) -> Result<(ModelBasis, Vec<(Vec<f64>, f64)>)> {
    let basis = spec.index.basis()?;
    let geo = Geometry::new(&spec.index, &basis, spec.sup_bound);
    let dim = geo.free_dim();
    let free: Vec<Vec<f64>> = match dim {
        0 => vec![vec![]],
        1 => {
            let w = geo.half_widths[0];
            (0..points)
                .map(|i| vec![-w + 2.0 * w * i as f64 / (points.max(2) - 1) as f64])
                .collect()
        }
        2 => {
            let side = (points as f64).sqrt().ceil() as usize;
            let (w0, w1) = (geo.half_widths[0], geo.half_widths[1]);
            let lin = |w: f64, i: usize| -w + 2.0 * w * i as f64 / (side.max(2) - 1) as f64;
            (0..side)
                .flat_map(|i| (0..side).map(move |j| vec![lin(w0, i), lin(w1, j)]))
                .collect()
        }
        _ => {
            return Err(Error::DimensionTooLarge { dim, limit: 2 });
        }
    };
    let kept = free
        .into_par_iter()
        .filter_map(|u| {
            let mut theta = Vec::new();
            if !geo.lift(&u, &mut theta) {
                return None;
            }
            let ev = evaluate(spec, &basis, &theta, true);
            ev.accepted.then_some((theta, ev.psi))
        })
        .collect::<Vec<_>>();
    if kept.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok((basis, kept))
}

/// One row of a tail-bound comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundRow {
    pub xi: f64,
    pub events: usize,
    pub replicates: usize,
    pub frequency: f64,
    pub envelope: f64,
    /// The envelope is below one.
    pub informative: bool,
    /// `xi` meets the inequality's floor.
    pub above_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub index: ModelIndex,
    pub gamma: f64,
    pub floor: f64,
    pub grid_points: usize,
    pub n: usize,
    pub rows: Vec<TailBoundRow>,
    /// Fraction of replicates meeting the noise conditioning (regression only).
    pub conditioning_rate: Option<f64>,
}

/// Settings shared by both tail checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub index: ModelIndex,
    pub n: usize,
    pub replicates: usize,
    pub xis: Vec<f64>,
    pub gamma: f64,
    pub grid: usize,
    pub seed: u64,
}

fn rows_from(
    maxima: &[(f64, f64, bool)],
    xis: &[f64],
    floor: f64,
    n: usize,
    envelope: impl Fn(f64) -> f64,
    extra: impl Fn(f64, f64) -> f64,
) -> Vec<TailBoundRow> {
    xis.iter()
        .map(|&xi| {
            let events = maxima
                .iter()
                .filter(|(stat, noise, ok)| *ok && *stat >= xi / n as f64 + extra(xi, *noise))
                .count();
            let env = envelope(xi);
            TailBoundRow {
                xi,
                events,
                replicates: maxima.len(),
                frequency: events as f64 / maxima.len() as f64,
                envelope: env,
                informative: env < 1.0,
                above_floor: xi >= floor,
            }
        })
        .collect()
}

/// Frequency of `{exists theta: (1/n) sum log(f_theta / f_o)(X_i) >= -gamma d_H^2(f_o, f_theta) + xi/n}`
/// against `15.1 exp(-(1 - 4 gamma) xi / 8)`, with the supremum over a parameter grid.
pub fn density_tail_mc(cfg: &TailConfig, truth: &dyn Density) -> Result<TailTable> {
    check_gamma(cfg.gamma)?;
    if cfg.index.family() != crate::Family::SplineDensity
        && cfg.index.family() != crate::Family::HaarDensity
    {
        return Err(invalid(
            "index",
            "the density tail check needs a density model",
        ));
    }
    let spec = ConstraintSpec::new(cfg.index);
    let (basis, pts) = theta_grid(&spec, cfg.grid)?;
    let grid: Vec<GridPoint> = pts
        .into_par_iter()
        .map(|(theta, psi)| {
            let f = ExpFamDensity::new(basis.clone(), theta.clone())?;
            let h = hellinger(truth, &f);
            Ok(GridPoint {
                theta,
                psi,
                dist_sq: h * h,
            })
        })
        .collect::<Result<_>>()?;
    let n = cfg.n;
    let p = basis.param_dim();
    let maxima: Vec<(f64, f64, bool)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = derived_rng(cfg.seed, &[0x6c37, r as u64]);
            let x = sample_density(truth, n, &mut rng);
            let mut s = vec![0.0; p];
            let mut feat = vec![0.0; p];
            for &xi in &x {
                basis.features_into(xi, &mut feat);
                s.iter_mut().zip(&feat).for_each(|(a, b)| *a += b);
            }
            let lo = log_likelihood_density(truth, &x);
            let best = grid
                .iter()
                .map(|g| {
                    let dot: f64 = g.theta.iter().zip(&s).map(|(a, b)| a * b).sum();
                    (dot - n as f64 * g.psi - lo) / n as f64 + cfg.gamma * g.dist_sq
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (best, 0.0, true)
        })
        .collect();
    let (a, m, _) = cfg.index.constants();
    let floor = density_eta_floor(a, m, cfg.gamma);
    let w = 1.0 - 4.0 * cfg.gamma;
    Ok(TailTable {
        index: cfg.index,
        gamma: cfg.gamma,
        floor,
        grid_points: grid.len(),
        n,
        rows: rows_from(
            &maxima,
            &cfg.xis,
            floor,
            n,
            |xi| 15.1 * (-w * xi / 8.0).exp(),
            |_, _| 0.0,
        ),
        conditioning_rate: None,
    })
}

/// Regression analogue: frequency of the squared-residual event on the noise-conditioning set
/// against `15.1 exp(-c_1 (1 - 4 gamma) xi / 8)`.
pub fn regression_tail_mc(
    cfg: &TailConfig,
    truth: &dyn UnitFunction,
    params: &RegressionParams,
) -> Result<TailTable> {
    check_gamma(cfg.gamma)?;
    params.validate()?;
    if cfg.index.family() != crate::Family::SplineRegression {
        return Err(invalid(
            "index",
            "the regression tail check needs a regression model",
        ));
    }
    let spec = ConstraintSpec::regression(cfg.index, params.sup_bound);
    let (basis, pts) = theta_grid(&spec, cfg.grid)?;
    let grid: Vec<GridPoint> = pts
        .into_par_iter()
        .map(|(theta, _)| {
            let f = basis.kernel(&theta)?;
            let d = l2_distance(truth, &f);
            Ok(GridPoint {
                theta,
                psi: 0.0,
                dist_sq: d * d,
            })
        })
        .collect::<Result<_>>()?;
    let n = cfg.n;
    let p = basis.param_dim();
    let sigma = params.sigma;
    let c0 = params.c0;
    let maxima: Vec<(f64, f64, bool)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = derived_rng(cfg.seed, &[0x6c39, r as u64]);
            let mut g = vec![0.0; p * p];
            let mut b = vec![0.0; p];
            let mut feat = vec![0.0; p];
            let (mut yy, mut r0, mut abs_e, mut sq_e, mut sum_e) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let x: f64 = rng.random();
                let e = sigma * rng.sample::<f64, _>(StandardNormal);
                let y = truth.value(x) + e;
                basis.features_into(x, &mut feat);
                for i in 0..p {
                    b[i] += feat[i] * y;
                    for j in 0..p {
                        g[i * p + j] += feat[i] * feat[j];
                    }
                }
                yy += y * y;
                r0 += e * e;
                abs_e += e.abs();
                sq_e += e * e;
                sum_e += e;
            }
            let nf = n as f64;
            let ok = abs_e / nf <= c0 && sq_e / nf <= c0 * c0;
            let best = grid
                .iter()
                .map(|gp| {
                    let t = &gp.theta;
                    let mut quad = 0.0;
                    for i in 0..p {
                        for j in 0..p {
                            quad += t[i] * g[i * p + j] * t[j];
                        }
                    }
                    let lin: f64 = t.iter().zip(&b).map(|(a, c)| a * c).sum();
                    let rss = yy - 2.0 * lin + quad;
                    (r0 - rss) / nf + cfg.gamma * gp.dist_sq
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (best, (sum_e / nf).abs(), ok)
        })
        .collect();
    let (a, m, _) = cfg.index.constants();
    let c1 = params.c1();
    let w = 1.0 - 4.0 * cfg.gamma;
    let floor = 4.0 * m as f64 / (c1 * w) * (1072.5 * a).ln();
    let cond = maxima.iter().filter(|m| m.2).count() as f64 / maxima.len().max(1) as f64;
    Ok(TailTable {
        index: cfg.index,
        gamma: cfg.gamma,
        floor,
        grid_points: grid.len(),
        n,
        rows: rows_from(
            &maxima,
            &cfg.xis,
            floor,
            n,
            |xi| 15.1 * (-c1 * w * xi / 8.0).exp(),
            |xi, noise| 0.0224 * noise * (xi / n as f64).sqrt(),
        ),
        conditioning_rate: Some(cond),
    })
}

/// Empirical frequency of an event against its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCheck {
    pub frequency: f64,
    pub bound: f64,
    pub replicates: usize,
}

impl FrequencyCheck {
    pub fn holds(&self) -> bool {
        self.frequency <= self.bound
    }
}

/// Chernoff: `P(sum log(g/f)(X_i) >= a) <= e^{-a/2} (1 - d_H^2(f, g)/2)^n` for `X_i ~ f`.
pub fn chernoff_check(
    f: &dyn Density,
    g: &dyn Density,
    n: usize,
    a: f64,
    replicates: usize,
    seed: u64,
) -> Result<FrequencyCheck> {
    let h = hellinger(f, g);
    let bound = (-a / 2.0 + n as f64 * (1.0 - h * h / 2.0).ln()).exp();
    let hits = (0..replicates)
        .into_par_iter()
        .filter(|&r| {
            let x = sample_density(f, n, &mut derived_rng(seed, &[0x6368, r as u64]));
            x.iter()
                .map(|&v| g.log_density(v) - f.log_density(v))
                .sum::<f64>()
                >= a
        })
        .count();
    Ok(FrequencyCheck {
        frequency: hits as f64 / replicates as f64,
        bound,
        replicates,
    })
}

/// Hoeffding for the bounded increments `log(g/f)(X_i)`, `X_i ~ f`, which lie in `[-s, s]` with
/// `s` the sup log ratio: `P(mean + D(f||g) >= t) <= exp(-2 n t^2 / (2s)^2)`.
pub fn hoeffding_check(
    f: &dyn Density,
    g: &dyn Density,
    n: usize,
    t: f64,
    replicates: usize,
    seed: u64,
) -> Result<FrequencyCheck> {
    let s = sup_log_ratio(f, g);
    let d = divergences(f, g)?.kl;
    let bound = if s > 0.0 {
        (-2.0 * n as f64 * t * t / (4.0 * s * s)).exp()
    } else {
        0.0
    };
    let hits = (0..replicates)
        .into_par_iter()
        .filter(|&r| {
            let x = sample_density(f, n, &mut derived_rng(seed, &[0x686f, r as u64]));
            let mean = x
                .iter()
                .map(|&v| g.log_density(v) - f.log_density(v))
                .sum::<f64>()
                / n as f64;
            mean + d >= t
        })
        .count();
    Ok(FrequencyCheck {
        frequency: hits as f64 / replicates as f64,
        bound,
        replicates,
    })
}

/// Tail comparison table for either family: the density check for a density truth, the
/// regression check (with the truth's `sigma` and `M`) for a regression truth.
pub fn tail_bound_mc(cfg: &TailConfig, truth: &super::Truth) -> Result<TailTable> {
    match truth {
        super::Truth::Density(d) => density_tail_mc(cfg, d.as_ref()),
        super::Truth::Regression {
            f,
            sigma,
            sup_bound,
        } => regression_tail_mc(cfg, f.as_ref(), &RegressionParams::new(*sigma, *sup_bound)?),
    }
}

/// Settings for the evidence lower-bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceFloorConfig {
    pub index: ModelIndex,
    pub n: usize,
    pub t_n: f64,
    pub replicates: usize,
    pub prior_samples: usize,
    pub mc: McConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceFloorResult {
    /// `log pi(B_D(t_n))` under Lebesgue measure on `Theta_j`.
    pub log_prior_mass: f64,
    /// Fraction of prior draws inside `B_D(t_n)`.
    pub inside_fraction: f64,
    /// `log(1/2 pi(B_D(t_n)) e^{-2 n t_n})`.
    pub log_threshold: f64,
    pub failures: usize,
    pub replicates: usize,
    pub frequency: f64,
    /// `2 / (n t_n)`.
    pub bound: f64,
    /// Smallest observed `log V_n - log threshold`.
    pub min_margin: f64,
}

/// Frequency of `V_n <= 1/2 pi(B_D(t_n)) e^{-2 n t_n}` for a single-model prior with Lebesgue `pi`.
pub fn evidence_floor_check(
    cfg: &EvidenceFloorConfig,
    truth: &dyn Density,
) -> Result<EvidenceFloorResult> {
    if !(cfg.t_n > 0.0) {
        return Err(invalid("t_n", "must be positive"));
    }
    if !cfg.index.family().is_density() {
        return Err(invalid("index", "needs a density model"));
    }
    let spec = ConstraintSpec::new(cfg.index);
    let basis = cfg.index.basis()?;
    let geo = Geometry::new(&cfg.index, &basis, None);
    let chunk = 1024;
    let chunks = cfg.prior_samples.div_ceil(chunk);
    let inside: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = derived_rng(cfg.seed, &[0x6c38, c as u64]);
            let mut u = vec![0.0; geo.free_dim()];
            let mut theta = Vec::new();
            let mut hits = 0;
            for _ in 0..chunk.min(cfg.prior_samples - c * chunk) {
                geo.uniform(&mut rng, &mut u);
                if !geo.lift(&u, &mut theta) || !evaluate(&spec, &basis, &theta, true).accepted {
                    continue;
                }
                let f = ExpFamDensity::new(basis.clone(), theta.clone())
                    .expect("member parameters are finite");
                if let Ok(rep) = divergences(truth, &f) {
                    if rep.kl <= cfg.t_n && rep.v_centered <= cfg.t_n {
                        hits += 1;
                    }
                }
            }
            hits
        })
        .sum();
    if inside == 0 {
        return Err(Error::MonteCarlo(
            "no prior draw landed in the KL neighbourhood; raise prior_samples".into(),
        ));
    }
    let frac = inside as f64 / cfg.prior_samples as f64;
    let log_mass = frac.ln() + geo.log_volume + geo.log_jacobian;
    let log_threshold = 0.5f64.ln() + log_mass - 2.0 * cfg.n as f64 * cfg.t_n;
    let margins: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let x = sample_density(
                truth,
                cfg.n,
                &mut derived_rng(cfg.seed, &[0x7664, r as u64]),
            );
            let lo = log_likelihood_density(truth, &x);
            let data = Dataset::Density { x };
            let (le, _) = model_evidence(
                &spec,
                &data,
                &cfg.mc,
                derive_seed(cfg.seed, &[0x6576, r as u64]),
            )?;
            Ok(le - lo - log_threshold)
        })
        .collect::<Result<_>>()?;
    let failures = margins.iter().filter(|m| **m <= 0.0).count();
    Ok(EvidenceFloorResult {
        log_prior_mass: log_mass,
        inside_fraction: frac,
        log_threshold,
        failures,
        replicates: cfg.replicates,
        frequency: failures as f64 / cfg.replicates as f64,
        bound: 2.0 / (cfg.n as f64 * cfg.t_n),
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Frequency of `U_n > alpha e^{-gamma n s_n^2 / 2}` against `15.1 exp(-(1 - 4 gamma) gamma n s_n^2 / 16)`.
pub fn un_envelope_check(
    spec: &SieveSpec,
    truth: &dyn Density,
    n: usize,
    s_n: f64,
    replicates: usize,
    mc: &McConfig,
    seed: u64,
) -> Result<FrequencyCheck> {
    let g = spec.gamma;
    let log_env = spec.log_alpha - g * n as f64 * s_n * s_n / 2.0;
    let bound = 15.1 * (-(1.0 - 4.0 * g) * g * n as f64 * s_n * s_n / 16.0).exp();
    let hits = (0..replicates)
        .map(|r| {
            let x = sample_density(
                truth,
                n,
                &mut rng_from(derive_seed(seed, &[0x756e, r as u64])),
            );
            let data = Dataset::Density { x };
            let post = posterior_sample(
                spec,
                &data,
                Some(TruthRef::Density(truth)),
                Metric::Hellinger,
                mc,
                derive_seed(seed, &[0x756f, r as u64]),
            )?;
            Ok((post.tail_mass(s_n)?.log_u > log_env) as usize)
        })
        .sum::<Result<usize>>()?;
    Ok(FrequencyCheck {
        frequency: hits as f64 / replicates as f64,
        bound,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Uniform;

    #[test]
    fn degenerate_gamma_rejected() {
        let cfg = TailConfig {
            index: ModelIndex::spline_density(1, 1, 1),
            n: 10,
            replicates: 1,
            xis: vec![1.0],
            gamma: 0.0,
            grid: 16,
            seed: 0,
        };
        assert!(density_tail_mc(&cfg, &Uniform).is_err());
    }

    #[test]
    fn chernoff_and_hoeffding_hold() {
        let g = ExpFamDensity::spline(1, 1, vec![0.3, -0.3]).unwrap();
        let c = chernoff_check(&Uniform, &g, 50, -2.0, 2000, 5).unwrap();
        assert!(c.holds(), "{c:?}");
        let h = hoeffding_check(&Uniform, &g, 50, 0.05, 2000, 6).unwrap();
        assert!(h.holds(), "{h:?}");
    }
}
