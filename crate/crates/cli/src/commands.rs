//! One function per subcommand: build the library inputs, run, write outputs.

use serde_json::json;
use sieve_core::entropy::verify_assumption_1;
use sieve_core::expfam::{ConstraintSpec, ExpFamDensity};
use sieve_core::harness::experiment::{RadiusRule, RateStatistic};
use sieve_core::harness::tails::{density_tail_mc, regression_tail_mc, TailConfig, TailTable};
use sieve_core::harness::{
    best_spline_fit, contraction_experiment, make_truth, rate_slope, ContractionConfig, Truth,
};
use sieve_core::metrics::divergences;
use sieve_core::posterior::TruthRef;
use sieve_core::sieve::{gamma_for, ModelIndex, SieveSpec};
use sieve_core::stats::linear_fit;
use sieve_core::Family;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_csv, write_json, Cell, Outputs};

type Res = Result<(), CliError>;

fn outputs(cfg: &RunConfig, stem: &'static str) -> Outputs {
    Outputs {
        dir: cfg.output_dir(),
        stem,
    }
}

/// `(k, q, level, L)` columns of a model.
fn index_cells(index: &ModelIndex) -> Vec<Cell> {
    let (k, q, level) = match *index {
        ModelIndex::SplineDensity { k, q, .. } | ModelIndex::SplineRegression { k, q, .. } => {
            (k, q, 0)
        }
        ModelIndex::HaarDensity { level, .. } => (0, 1, level),
    };
    vec![
        k.into(),
        q.into(),
        level.into(),
        (index.bound() as u32).into(),
    ]
}

fn report(out: &Outputs) {
    println!("wrote {} and {}", out.csv().display(), out.json().display());
}

/// Columns: `family,k,q,level,L,m,A,C,eta,log_a`.
pub fn constants(cfg: &RunConfig) -> Res {
    let spec = SieveSpec::build(cfg.sieve()?)?;
    let rows: Vec<Vec<Cell>> = spec
        .models
        .iter()
        .map(|m| {
            let mut row = vec![Cell::from(m.index.family().name())];
            row.extend(index_cells(&m.index));
            let c = m.constants;
            row.extend([
                c.m.into(),
                c.a.into(),
                c.c.into(),
                c.eta.into(),
                c.log_a.into(),
            ]);
            row
        })
        .collect();
    let out = outputs(cfg, "constants");
    write_csv(
        &out.csv(),
        &[
            "family", "k", "q", "level", "L", "m", "A", "C", "eta", "log_a",
        ],
        &rows,
    )?;
    write_json(
        &out.json(),
        &json!({
            "config": cfg,
            "models": spec.models.len(),
            "rho": spec.rho,
            "gamma": spec.gamma,
            "kappa": spec.kappa,
            "log_alpha": spec.log_alpha,
            "summability": spec.summability,
            "truncation_tail": spec.truncation_tail,
        }),
    )?;
    println!(
        "{} models, gamma = {:.6}, kappa = {:.6}",
        spec.models.len(),
        spec.gamma,
        spec.kappa
    );
    report(&out);
    Ok(())
}

fn constraint(cfg: &RunConfig, index: ModelIndex) -> Result<ConstraintSpec, CliError> {
    Ok(if index.family() == Family::SplineRegression {
        ConstraintSpec::regression(index, RunConfig::require(&cfg.sup_bound, "sup_bound")?)
    } else {
        ConstraintSpec::new(index)
    })
}

/// Columns: `global,r,delta,region,count,bound,ratio`.
pub fn entropy_check(cfg: &RunConfig) -> Res {
    let index = RunConfig::require(&cfg.model, "model")?;
    let spec = constraint(cfg, index)?;
    let mut ec = cfg.entropy.unwrap_or_default();
    if let Some(rho) = cfg.rho {
        ec.rho = rho;
    }
    if let Some(seed) = cfg.seed {
        ec.seed = seed;
    }
    let truth = cfg.truth.as_ref().map(make_truth).transpose()?;
    let density = match truth.as_ref().map(|t| &t.truth) {
        Some(Truth::Density(d)) => Some(d.as_ref() as &dyn sieve_core::function::Density),
        Some(_) => {
            return Err(CliError::validation(
                "truth",
                "the covering check takes a density truth",
            ))
        }
        None => None,
    };
    let rep = verify_assumption_1(&spec, density, &ec)?;
    let rows: Vec<Vec<Cell>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.global.into(),
                r.r.into(),
                r.delta.into(),
                r.region.into(),
                r.count.into(),
                r.bound.into(),
                r.ratio.into(),
            ]
        })
        .collect();
    let out = outputs(cfg, "entropy");
    write_csv(
        &out.csv(),
        &["global", "r", "delta", "region", "count", "bound", "ratio"],
        &rows,
    )?;
    write_json(
        &out.json(),
        &json!({
            "config": cfg,
            "entropy": ec,
            "index": rep.index,
            "A": rep.a,
            "m": rep.m,
            "cloud": rep.cloud,
            "worst_ratio": rep.worst_ratio,
            "inclusion_violations": rep.inclusion_violations,
        }),
    )?;
    println!(
        "worst count/bound = {:.6}, inclusion violations = {}",
        rep.worst_ratio, rep.inclusion_violations
    );
    report(&out);
    Ok(())
}

/// Columns: `xi,events,replicates,frequency,envelope,informative,above_floor`.
pub fn bounds_check(cfg: &RunConfig) -> Res {
    let index = RunConfig::require(&cfg.model, "model")?;
    let truth = make_truth(&RunConfig::require(&cfg.truth, "truth")?)?;
    let reg = match index.family() {
        Family::SplineRegression => Some(cfg.regression_params()?),
        _ => None,
    };
    let gamma = match cfg.gamma {
        Some(g) => g,
        None => gamma_for(
            index.family(),
            cfg.rho
                .unwrap_or(if reg.is_some() { 0.0056 } else { 0.056 }),
            reg.as_ref(),
        )?,
    };
    let tc = TailConfig {
        index,
        n: RunConfig::require(&cfg.n, "n")?,
        replicates: cfg.replicates.unwrap_or(2000),
        xis: RunConfig::require(&cfg.xis, "xis")?,
        gamma,
        grid: cfg.grid.unwrap_or(2048),
        seed: cfg.seed(),
    };
    let table: TailTable = match (&truth.truth, reg) {
        (Truth::Density(d), None) => density_tail_mc(&tc, d.as_ref())?,
        (Truth::Regression { f, .. }, Some(p)) => regression_tail_mc(&tc, f.as_ref(), &p)?,
        _ => {
            return Err(CliError::validation(
                "truth",
                "truth kind does not match the model family",
            ))
        }
    };
    let rows: Vec<Vec<Cell>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.xi.into(),
                r.events.into(),
                r.replicates.into(),
                r.frequency.into(),
                r.envelope.into(),
                r.informative.into(),
                r.above_floor.into(),
            ]
        })
        .collect();
    let out = outputs(cfg, "bounds");
    write_csv(
        &out.csv(),
        &[
            "xi",
            "events",
            "replicates",
            "frequency",
            "envelope",
            "informative",
            "above_floor",
        ],
        &rows,
    )?;
    let violations = table
        .rows
        .iter()
        .filter(|r| r.informative && r.frequency > r.envelope)
        .count();
    write_json(
        &out.json(),
        &json!({
            "config": cfg,
            "index": table.index,
            "gamma": table.gamma,
            "floor": table.floor,
            "grid_points": table.grid_points,
            "n": table.n,
            "conditioning_rate": table.conditioning_rate,
            "violations": violations,
        }),
    )?;
    println!(
        "{} xi values, {violations} informative rows above the envelope",
        table.rows.len()
    );
    report(&out);
    Ok(())
}

/// Columns: `k,q,L,sup_error,kl,v,member`.
pub fn approx_check(cfg: &RunConfig) -> Res {
    let truth = make_truth(&RunConfig::require(&cfg.truth, "truth")?)?;
    let q = RunConfig::require(&cfg.q, "q")?;
    let ks = RunConfig::require(&cfg.ks, "ks")?;
    let (sigma, sup_bound) = match &truth.truth {
        Truth::Regression {
            sigma, sup_bound, ..
        } => (Some(*sigma), Some(cfg.sup_bound.unwrap_or(*sup_bound))),
        Truth::Density(_) => (None, None),
    };
    let fits = ks
        .iter()
        .map(|&k| best_spline_fit(truth.as_ref(), k, q, sigma, sup_bound))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<Cell>> = ks
        .iter()
        .zip(&fits)
        .map(|(&k, t)| {
            vec![
                k.into(),
                q.into(),
                (t.index.bound() as u32).into(),
                t.sup_error.into(),
                t.kl.into(),
                t.v.into(),
                t.member.into(),
            ]
        })
        .collect();
    let slope = (ks.len() >= 2).then(|| {
        let x: Vec<f64> = ks.iter().map(|&k| ((k + 1) as f64).ln()).collect();
        let y: Vec<f64> = fits.iter().map(|t| t.sup_error.ln()).collect();
        linear_fit(&x, &y).0
    });
    let out = outputs(cfg, "approx");
    write_csv(
        &out.csv(),
        &["k", "q", "L", "sup_error", "kl", "v", "member"],
        &rows,
    )?;
    write_json(
        &out.json(),
        &json!({ "config": cfg, "slope": slope, "targets": fits }),
    )?;
    if let Some(s) = slope {
        println!("sup-error slope vs log(k + 1) = {s:.6}");
    }
    report(&out);
    Ok(())
}

/// Columns: `n,replicate,rule,radius,tail_mass,tail_se,log_u,log_v`.
pub fn simulate(cfg: &RunConfig, density: bool) -> Res {
    let sieve = cfg.sieve()?;
    if sieve.family.is_density() != density {
        return Err(CliError::validation(
            "family",
            if density {
                "density-sim needs a density family"
            } else {
                "regression-sim needs spline-regression"
            },
        ));
    }
    let cc = ContractionConfig {
        truth: RunConfig::require(&cfg.truth, "truth")?,
        sieve,
        n_grid: RunConfig::require(&cfg.n_grid, "n_grid")?,
        radii: cfg.radii.clone().unwrap_or_else(|| {
            vec![RadiusRule::Power {
                c: 2.0,
                exponent: 1.0 / 3.0,
            }]
        }),
        replicates: cfg.replicates.unwrap_or(8),
        seed: cfg.seed(),
        mc: cfg.mc.unwrap_or_default(),
        metric: cfg.metric,
    };
    let res = contraction_experiment(&cc)?;
    let rows: Vec<Vec<Cell>> = res
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.into(),
                r.replicate.into(),
                r.rule.into(),
                r.radius.into(),
                r.tail_mass.into(),
                r.tail_se.into(),
                r.log_u.into(),
                r.log_v.into(),
            ]
        })
        .collect();
    let slope = |s: RateStatistic| match rate_slope(&res, s) {
        Ok(e) => json!(e),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let out = outputs(
        cfg,
        if density {
            "density_sim"
        } else {
            "regression_sim"
        },
    );
    write_csv(
        &out.csv(),
        &[
            "n",
            "replicate",
            "rule",
            "radius",
            "tail_mass",
            "tail_se",
            "log_u",
            "log_v",
        ],
        &rows,
    )?;
    write_json(
        &out.json(),
        &json!({
            "config": cfg,
            "metric": res.metric,
            "models": res.models,
            "summary": res.summary,
            "replicates": res.replicates,
            "slopes": {
                "half_mass_radius": slope(RateStatistic::HalfMassRadius),
                "grid_half_mass": slope(RateStatistic::GridHalfMass),
            },
        }),
    )?;
    for s in &res.summary {
        let tails: Vec<String> = s.median_tail.iter().map(|t| format!("{t:.3e}")).collect();
        println!(
            "n = {}: median tail mass [{}], median half-mass radius {:.4}",
            s.n,
            tails.join(", "),
            s.median_half_mass
        );
    }
    report(&out);
    Ok(())
}

/// Prints the divergences between the truth and the log-spline density `theta`.
pub fn divergence(cfg: &RunConfig) -> Res {
    let truth = make_truth(&RunConfig::require(&cfg.truth, "truth")?)?;
    let theta = RunConfig::require(&cfg.theta, "theta")?;
    let q = RunConfig::require(&cfg.q, "q")?;
    let k = RunConfig::require(&cfg.k, "k")?;
    let g = ExpFamDensity::spline(k, q, theta)?;
    let TruthRef::Density(f) = truth.as_ref() else {
        return Err(CliError::validation(
            "truth",
            "divergences need a density truth",
        ));
    };
    let d = divergences(f, &g)?;
    println!("d_H = {:.10}", d.hellinger);
    println!("D = {:.10}", d.kl);
    println!("V = {:.10}", d.v);
    println!("V' = {:.10}", d.v_centered);
    println!("L2 = {:.10}", d.l2);
    println!("sup|log f_o - log f| = {:.10}", d.sup_log_ratio);
    if cfg.output_dir.is_some() {
        let out = outputs(cfg, "divergence");
        write_json(&out.json(), &json!({ "config": cfg, "divergences": d }))?;
    }
    Ok(())
}
