//! Covering and packing numbers of finite point clouds, and brute-force checks of the
//! entropy assumptions on low-dimensional parameter sets.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expfam::{evaluate, ConstraintSpec, ModelBasis};
use crate::function::Density;
use crate::piecewise::PiecewisePoly;
use crate::posterior::Geometry;
use crate::quadrature::small_rule;
use crate::rng::derived_rng;
use crate::sieve::ModelIndex;
use crate::Family;

/// Candidate centres examined per greedy step.
const CANDIDATES: usize = 64;
/// Grid points per panel for sup norms of polynomials of degree two or more.
const SUP_POINTS_PER_PANEL: usize = 1025;
/// Gauss nodes per panel for Hellinger and L2 embeddings.
const EMBED_NODES: usize = 24;
/// Largest model dimension accepted by the brute-force checks.
pub const MAX_BRUTE_FORCE_DIM: usize = 3;

type MetricFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A finite point cloud with a metric.
pub struct MetricSpace {
    points: Vec<Vec<f64>>,
    metric: Box<MetricFn>,
}

impl MetricSpace {
    pub fn with_metric(
        points: Vec<Vec<f64>>,
        metric: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            points,
            metric: Box::new(metric),
        }
    }

    /// Max-coordinate metric.
    pub fn sup(points: Vec<Vec<f64>>) -> Self {
        Self::with_metric(points, sup_distance)
    }

    /// Euclidean metric.
    pub fn euclidean(points: Vec<Vec<f64>>) -> Self {
        Self::with_metric(points, euclidean_distance)
    }

    /// Real numbers under `|a - b|`.
    pub fn line(values: &[f64]) -> Self {
        Self::sup(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.metric)(&self.points[i], &self.points[j])
    }

    /// Every index.
    pub fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_region(space: &MetricSpace, region: &[usize], delta: f64) -> Result<()> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    if let Some(&i) = region.iter().find(|&&i| i >= space.len()) {
        return Err(invalid("region", format!("index {i} outside the cloud")));
    }
    Ok(())
}

/// Greedy `delta`-cover of `region` with centres drawn from the region.
///
/// Region points are visited in order; the first uncovered point anchors a step, and among
/// the points within `delta` of the anchor the one covering most uncovered points becomes the
/// centre. On a sorted line this is the optimal interval sweep.
pub fn greedy_cover(space: &MetricSpace, region: &[usize], delta: f64) -> Result<Vec<usize>> {
    check_region(space, region, delta)?;
    let mut covered = vec![false; region.len()];
    let mut centres = Vec::new();
    let within = |from: usize| -> Vec<usize> {
        region
            .par_iter()
            .enumerate()
            .filter(|(_, &p)| space.distance(from, p) <= delta)
            .map(|(pos, _)| pos)
            .collect()
    };
    for a in 0..region.len() {
        if covered[a] {
            continue;
        }
        let candidates = within(region[a]);
        let picks: Vec<usize> = if candidates.len() <= CANDIDATES {
            candidates.clone()
        } else {
            let mut v: Vec<usize> = (0..CANDIDATES)
                .map(|i| candidates[i * (candidates.len() - 1) / (CANDIDATES - 1)])
                .collect();
            v.dedup();
            v
        };
        let covered_ref = &covered;
        let counts: Vec<usize> = picks
            .par_iter()
            .map(|&c| {
                region
                    .iter()
                    .enumerate()
                    .filter(|(pos, &p)| !covered_ref[*pos] && space.distance(region[c], p) <= delta)
                    .count()
            })
            .collect();
        let best = (0..picks.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
        let centre = picks[best];
        for pos in within(region[centre]) {
            covered[pos] = true;
        }
        centres.push(region[centre]);
    }
    Ok(centres)
}

/// Size of a greedy `delta`-cover: an upper bound on `N(region, delta, d)`.
pub fn covering_number_upper(space: &MetricSpace, region: &[usize], delta: f64) -> Result<usize> {
    greedy_cover(space, region, delta).map(|c| c.len())
}

/// Whether every region point is within `delta` of some centre.
pub fn cover_is_valid(
    space: &MetricSpace,
    region: &[usize],
    centres: &[usize],
    delta: f64,
) -> bool {
    region
        .par_iter()
        .all(|&p| centres.iter().any(|&c| space.distance(c, p) <= delta))
}

/// Size of a greedy maximal `delta`-separated subset: a lower bound on `N(region, delta/2, d)`.
pub fn packing_number_lower(space: &MetricSpace, region: &[usize], delta: f64) -> Result<usize> {
    check_region(space, region, delta)?;
    let mut chosen: Vec<usize> = Vec::new();
    for &p in region {
        if chosen.iter().all(|&c| space.distance(c, p) > delta) {
            chosen.push(p);
        }
    }
    Ok(chosen.len())
}

/// Results of spot-checking the metric axioms on random triples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub triples: usize,
    pub max_asymmetry: f64,
    pub min_value: f64,
    /// Largest `d(a, c) - d(a, b) - d(b, c)`.
    pub max_triangle_excess: f64,
}

pub fn spot_check_metric(space: &MetricSpace, triples: usize, seed: u64) -> Result<MetricCheck> {
    if space.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut rng = derived_rng(seed, &[0x6d65_7472]);
    let n = space.len();
    let mut out = MetricCheck {
        triples,
        max_asymmetry: 0.0,
        min_value: f64::INFINITY,
        max_triangle_excess: f64::NEG_INFINITY,
    };
    for _ in 0..triples {
        let (a, b, c) = (
            rng.random_range(0..n),
            rng.random_range(0..n),
            rng.random_range(0..n),
        );
        let ab = space.distance(a, b);
        let ba = space.distance(b, a);
        let bc = space.distance(b, c);
        let ac = space.distance(a, c);
        out.max_asymmetry = out.max_asymmetry.max((ab - ba).abs());
        out.min_value = out.min_value.min(ab).min(bc).min(ac);
        out.max_triangle_excess = out.max_triangle_excess.max(ac - ab - bc);
    }
    Ok(out)
}

/// Radical-inverse (Halton) point `i` in `[0, 1)^dim`.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    PRIMES[..dim]
        .iter()
        .map(|&b| {
            let (mut f, mut r, mut k) = (1.0, 0.0, i);
            while k > 0 {
                f /= b as f64;
                r += f * (k % b) as f64;
                k /= b;
            }
            r
        })
        .collect()
}

/// Exact (degree <= 1) or gridded values of a piecewise polynomial for sup distances.
fn sup_embedding(p: &PiecewisePoly, shift: f64) -> Vec<f64> {
    match p.degree() {
        0 => (0..p.num_panels()).map(|i| p.panel(i)[0] - shift).collect(),
        1 => {
            let mut v: Vec<f64> = (0..p.num_panels()).map(|i| p.panel(i)[0] - shift).collect();
            v.push(p.eval(1.0) - shift);
            v
        }
        _ => {
            let b = p.breaks();
            let mut v = Vec::new();
            for i in 0..p.num_panels() {
                for s in 0..SUP_POINTS_PER_PANEL {
                    let x = b[i] + (b[i + 1] - b[i]) * s as f64 / (SUP_POINTS_PER_PANEL - 1) as f64;
                    v.push(p.eval_in_panel(i, x) - shift);
                }
            }
            v
        }
    }
}

/// `sqrt(w_i) g(x_i)` on Gauss nodes, so Euclidean distance is the L2 distance of `g`.
fn l2_embedding(breaks: &[f64], g: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let rule = small_rule(EMBED_NODES);
    let mut v = Vec::new();
    for i in 0..breaks.len() - 1 {
        for (x, w) in rule.mapped(breaks[i], breaks[i + 1]) {
            v.push(w.sqrt() * g(i, x));
        }
    }
    v
}

/// Points of `Theta_j` with the embeddings needed for the model metrics.
///
/// `sup` embeds `log f_theta` (densities) or `f_theta` (regression) so that the max-coordinate
/// distance is `d_{j,inf}`; `l2` embeds `sqrt f_theta` (densities, giving Hellinger) or
/// `f_theta` (regression, giving L2) so that Euclidean distance is the model's metric.
pub struct ModelCloud {
    pub index: ModelIndex,
    pub free: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    pub sup: Vec<Vec<f64>>,
    pub l2: Vec<Vec<f64>>,
    /// Halton points tried.
    pub tried: usize,
}

impl ModelCloud {
    /// Halton points in the bounding box of `Theta_j`, filtered by membership and sorted.
    pub fn build(spec: &ConstraintSpec, points: usize) -> Result<Self> {
        let index = spec.index;
        index.validate()?;
        if index.dim() > MAX_BRUTE_FORCE_DIM {
            return Err(Error::DimensionTooLarge {
                dim: index.dim(),
                limit: MAX_BRUTE_FORCE_DIM,
            });
        }
        if index.family() == Family::SplineRegression && spec.sup_bound.is_none() {
            return Err(invalid("M", "regression models need the sup bound M"));
        }
        let basis = index.basis()?;
        let geo = Geometry::new(&index, &basis, spec.sup_bound);
        let dim = geo.free_dim();
        let raw: Vec<Vec<f64>> = if dim == 0 {
            vec![vec![]]
        } else {
            (1..=points as u64)
                .map(|i| {
                    halton(i, dim)
                        .iter()
                        .zip(&geo.half_widths)
                        .map(|(h, w)| (2.0 * h - 1.0) * w)
                        .collect()
                })
                .collect()
        };
        let tried = raw.len();
        let mut kept: Vec<(Vec<f64>, Vec<f64>, f64, PiecewisePoly)> = raw
            .into_par_iter()
            .filter_map(|u| {
                let mut theta = Vec::new();
                if !geo.lift(&u, &mut theta) {
                    return None;
                }
                let ev = evaluate(spec, &basis, &theta, true);
                ev.accepted.then_some((u, theta, ev.psi, ev.kernel))
            })
            .collect();
        kept.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let density = index.family().is_density();
        let breaks = basis.breakpoints();
        let mut cloud = Self {
            index,
            free: Vec::with_capacity(kept.len()),
            theta: Vec::with_capacity(kept.len()),
            psi: Vec::with_capacity(kept.len()),
            sup: Vec::with_capacity(kept.len()),
            l2: Vec::with_capacity(kept.len()),
            tried,
        };
        let embedded: Vec<(Vec<f64>, Vec<f64>)> = kept
            .par_iter()
            .map(|(_, _, psi, kernel)| {
                let s = sup_embedding(kernel, *psi);
                let l = l2_embedding(&breaks, |i, x| {
                    let k = kernel.eval_in_panel(i, x);
                    if density {
                        ((k - psi) / 2.0).exp()
                    } else {
                        k
                    }
                });
                (s, l)
            })
            .collect();
        for ((u, theta, psi, _), (s, l)) in kept.into_iter().zip(embedded) {
            cloud.free.push(u);
            cloud.theta.push(theta);
            cloud.psi.push(psi);
            cloud.sup.push(s);
            cloud.l2.push(l);
        }
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// The cloud under `d_{j,inf}`.
    pub fn sup_space(&self) -> MetricSpace {
        MetricSpace::sup(self.sup.clone())
    }

    /// The cloud under the Hellinger (density) or L2 (regression) metric.
    pub fn l2_space(&self) -> MetricSpace {
        MetricSpace::euclidean(self.l2.clone())
    }

    /// Embedding of a truth density on the same nodes as `l2`.
    pub fn embed_truth_density(&self, truth: &dyn Density) -> Result<Vec<f64>> {
        let basis = self.index.basis()?;
        Ok(l2_embedding(&basis.breakpoints(), |_, x| {
            (truth.log_density(x) / 2.0).exp()
        }))
    }
}

/// One covering measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverRow {
    /// `false` for the local ball around a cloud point, `true` for the ball around the truth.
    pub global: bool,
    pub r: f64,
    pub delta: f64,
    pub region: usize,
    pub count: usize,
    pub bound: f64,
    /// `count / bound`.
    pub ratio: f64,
}

/// Result of the brute-force covering check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Report {
    pub index: ModelIndex,
    pub a: f64,
    pub m: usize,
    pub rho: f64,
    pub cloud: usize,
    pub rows: Vec<CoverRow>,
    pub worst_ratio: f64,
    /// Global-ball points farther than `3r` from the near-minimiser of the distance to the truth.
    pub inclusion_violations: usize,
}

/// Settings for [`verify_assumption_1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub rho: f64,
    pub trials: usize,
    pub cloud_points: usize,
    /// Radii are log-uniform on this range.
    pub r_range: (f64, f64),
    pub seed: u64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            rho: crate::sieve::DEFAULT_DENSITY_RHO,
            trials: 20,
            cloud_points: 100_000,
            r_range: (0.05, 0.5),
            seed: 1,
        }
    }
}

/// Points of `region` within `r` of `centre` (Euclidean on `l2` embeddings).
fn ball(points: &[Vec<f64>], centre: &[f64], r: f64) -> Vec<usize> {
    (0..points.len())
        .into_par_iter()
        .filter(|&i| euclidean_distance(&points[i], centre) <= r)
        .collect()
}

/// Covering counts of Hellinger (or L2) balls under `d_{j,inf}` against `(A r / delta)^m`
/// (local balls) and `(3 A r / delta)^m` (balls around the truth), plus the factor-3 inclusion.
pub fn verify_assumption_1(
    spec: &ConstraintSpec,
    truth: Option<&dyn Density>,
    cfg: &EntropyConfig,
) -> Result<Assumption1Report> {
    if !(cfg.rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    if !(cfg.r_range.0 > 0.0 && cfg.r_range.1 >= cfg.r_range.0) {
        return Err(invalid("r_range", "must be a positive interval"));
    }
    let cloud = ModelCloud::build(spec, cfg.cloud_points)?;
    if cloud.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (a, m, _) = spec.index.constants();
    let sup = cloud.sup_space();
    let mut rng = derived_rng(cfg.seed, &[0x656e_7472]);
    let truth_emb = match truth {
        Some(t) if spec.index.family().is_density() => Some(cloud.embed_truth_density(t)?),
        Some(_) | None => None,
    };
    let mut rows = Vec::new();
    let mut violations = 0;
    let (lo, hi) = cfg.r_range;
    for t in 0..cfg.trials {
        let r = lo * (hi / lo).powf(rng.random::<f64>());
        // The first trial sits on the boundary delta = rho r.
        let u = if t == 0 {
            1.0
        } else {
            0.5 + 0.5 * rng.random::<f64>()
        };
        let delta = cfg.rho * r * u;
        let centre = rng.random_range(0..cloud.len());
        let region = ball(&cloud.l2, &cloud.l2[centre], r);
        let count = covering_number_upper(&sup, &region, delta)?;
        let bound = (a * r / delta).powi(m as i32);
        rows.push(CoverRow {
            global: false,
            r,
            delta,
            region: region.len(),
            count,
            bound,
            ratio: count as f64 / bound,
        });
        if let Some(te) = &truth_emb {
            let region = ball(&cloud.l2, te, r);
            if region.is_empty() {
                continue;
            }
            let count = covering_number_upper(&sup, &region, delta)?;
            let bound = (3.0 * a * r / delta).powi(m as i32);
            rows.push(CoverRow {
                global: true,
                r,
                delta,
                region: region.len(),
                count,
                bound,
                ratio: count as f64 / bound,
            });
            violations += inclusion_violations(&cloud.l2, te, r);
        }
    }
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(Assumption1Report {
        index: spec.index,
        a,
        m,
        rho: cfg.rho,
        cloud: cloud.len(),
        rows,
        worst_ratio,
        inclusion_violations: violations,
    })
}

/// Points of the ball of radius `r` around `truth` lying outside the ball of radius `3r` around
/// the cloud point nearest the truth.
pub fn inclusion_violations(points: &[Vec<f64>], truth: &[f64], r: f64) -> usize {
    let dists: Vec<f64> = points
        .par_iter()
        .map(|p| euclidean_distance(p, truth))
        .collect();
    let Some(star) = (0..dists.len()).min_by(|&i, &j| dists[i].total_cmp(&dists[j])) else {
        return 0;
    };
    (0..points.len())
        .into_par_iter()
        .filter(|&i| dists[i] <= r && euclidean_distance(&points[i], &points[star]) > 3.0 * r)
        .count()
}

/// Measured `N(Theta_j, eps, d_{j,inf})` against the declared `(A^{b_1} K_4)^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupEntropyCheck {
    pub eps: f64,
    pub count: usize,
    pub bound: f64,
    pub holds: bool,
}

pub fn sup_entropy_check(
    spec: &ConstraintSpec,
    eps: f64,
    k4: f64,
    b1: f64,
    cloud_points: usize,
) -> Result<SupEntropyCheck> {
    let cloud = ModelCloud::build(spec, cloud_points)?;
    if cloud.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let sup = cloud.sup_space();
    let count = covering_number_upper(&sup, &sup.all(), eps)?;
    let (a, m, _) = spec.index.constants();
    let bound = (a.powf(b1) * k4).powi(m as i32);
    Ok(SupEntropyCheck {
        eps,
        count,
        bound,
        holds: count as f64 <= bound,
    })
}

/// Monte Carlo ratio of prior masses of two `d_{j,inf}` balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMassRatio {
    pub ratio: f64,
    pub se: f64,
    pub hits_a: usize,
    pub hits_b: usize,
    pub samples: usize,
}

/// `pi_j(B(centre_b, eps)) / pi_j(B(centre_a, eps))` under Lebesgue `pi_j`, from uniform
/// bounding-box draws shared by both balls.
pub fn ball_mass_ratio(
    spec: &ConstraintSpec,
    centre_a: &[f64],
    centre_b: &[f64],
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<BallMassRatio> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let index = spec.index;
    let basis = index.basis()?;
    let embed = |theta: &[f64]| -> Result<Vec<f64>> {
        let ev = evaluate(spec, &basis, theta, false);
        if !ev.accepted {
            return Err(invalid("centre", "must lie in the parameter set"));
        }
        Ok(sup_embedding(&ev.kernel, ev.psi))
    };
    if centre_a.len() != basis.param_dim() || centre_b.len() != basis.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.param_dim(),
            found: centre_a.len().min(centre_b.len()),
        });
    }
    let ea = embed(centre_a)?;
    let eb = embed(centre_b)?;
    let geo = Geometry::new(&index, &basis, spec.sup_bound);
    let chunk = 4096;
    let chunks = samples.div_ceil(chunk);
    let tallies: Vec<(usize, usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = derived_rng(seed, &[0x6261_6c6c, c as u64]);
            let mut u = vec![0.0; geo.free_dim()];
            let mut theta = Vec::new();
            let (mut na, mut nb, mut nab) = (0, 0, 0);
            for _ in 0..chunk.min(samples - c * chunk) {
                geo.uniform(&mut rng, &mut u);
                if !geo.lift(&u, &mut theta) {
                    continue;
                }
                let ev = evaluate(spec, &basis, &theta, true);
                if !ev.accepted {
                    continue;
                }
                let e = sup_embedding(&ev.kernel, ev.psi);
                let ia = sup_distance(&e, &ea) <= eps;
                let ib = sup_distance(&e, &eb) <= eps;
                na += ia as usize;
                nb += ib as usize;
                nab += (ia && ib) as usize;
            }
            (na, nb, nab)
        })
        .collect();
    let (na, nb, nab) = tallies
        .iter()
        .fold((0, 0, 0), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    if na == 0 {
        return Err(Error::MonteCarlo(format!(
            "no draw landed in the ball around centre_a; epsilon = {eps} is too small for {samples} samples"
        )));
    }
    let n = samples as f64;
    let (pa, pb, pab) = (na as f64 / n, nb as f64 / n, nab as f64 / n);
    let ratio = nb as f64 / na as f64;
    let se = if nb == 0 {
        f64::INFINITY
    } else {
        let var =
            (1.0 - pa) / (n * pa) + (1.0 - pb) / (n * pb) - 2.0 * (pab - pa * pb) / (n * pa * pb);
        ratio * var.max(0.0).sqrt()
    };
    Ok(BallMassRatio {
        ratio,
        se,
        hits_a: na,
        hits_b: nb,
        samples,
    })
}

/// Free coordinates' bounding box of `Theta_j`, as half-widths.
pub fn bounding_box(spec: &ConstraintSpec) -> Result<Vec<f64>> {
    let basis: ModelBasis = spec.index.basis()?;
    Ok(Geometry::new(&spec.index, &basis, spec.sup_bound).half_widths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_cover() {
        let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 * 1e-4).collect();
        let s = MetricSpace::line(&grid);
        let all = s.all();
        assert_eq!(covering_number_upper(&s, &all, 0.25).unwrap(), 2);
        assert_eq!(covering_number_upper(&s, &all, 1.0).unwrap(), 1);
        assert!(packing_number_lower(&s, &all, 0.5).unwrap() >= 2);
        assert_eq!(packing_number_lower(&s, &[7], 0.1).unwrap(), 1);
    }

    #[test]
    fn empty_region_rejected() {
        let s = MetricSpace::line(&[0.0, 1.0]);
        assert!(matches!(
            covering_number_upper(&s, &[], 0.1),
            Err(Error::EmptyRegion)
        ));
        assert!(covering_number_upper(&s, &[0], 0.0).is_err());
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }

    #[test]
    fn large_dimension_rejected() {
        let spec = ConstraintSpec::new(ModelIndex::spline_density(3, 2, 1));
        assert!(matches!(
            ModelCloud::build(&spec, 10),
            Err(Error::DimensionTooLarge { .. })
        ));
    }
}
