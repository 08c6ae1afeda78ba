//! `sievepost`: batch front end for the sieve-prior library.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sieve_core::harness::TruthSpec;
use sieve_core::sieve::Truncation;
use sieve_core::Family;

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sievepost",
    version,
    about = "Sieve-prior posterior experiments and numerical checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-model prior constants (A, m, C, eta, log a) of a truncated sieve.
    Constants(Flags),
    /// Greedy covering counts against the entropy bound for one model.
    EntropyCheck(Flags),
    /// Monte Carlo frequency of the likelihood-ratio tail event against its envelope.
    BoundsCheck(Flags),
    /// Least-squares spline approximation errors and their decay.
    ApproxCheck(Flags),
    /// Density contraction experiment.
    DensitySim(Flags),
    /// Regression contraction experiment.
    RegressionSim(Flags),
    /// Divergences between a truth and one log-spline density.
    Divergence(Flags),
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Args)]
struct Flags {
    /// JSON run configuration (or the JSON summary of an earlier run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $SIEVEPOST_OUTPUT_DIR or ./sievepost-out).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    qmax: Option<usize>,
    #[arg(long)]
    lmax: Option<u32>,
    #[arg(long)]
    level_max: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Sup bound M for regression.
    #[arg(long = "sup-bound", alias = "M")]
    sup_bound: Option<f64>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Monte Carlo draws per model.
    #[arg(long)]
    draws: Option<usize>,
    /// `uniform` or a JSON truth object.
    #[arg(long)]
    truth: Option<String>,
    /// Comma-separated coefficients; `logX` stands for ln X.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Comma-separated knot counts.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Sample size for `bounds-check`.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated xi grid for `bounds-check`.
    #[arg(long, value_delimiter = ',')]
    xis: Option<Vec<f64>>,
}

fn parse_number(tok: &str) -> Result<f64, CliError> {
    let t = tok.trim();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    let v = match body.strip_prefix("log") {
        Some(arg) => arg.parse::<f64>().map(f64::ln),
        None => body.parse::<f64>(),
    };
    v.map(|x| sign * x)
        .map_err(|_| CliError::validation("theta", format!("cannot parse `{tok}`")))
}

fn parse_truth(s: &str) -> Result<TruthSpec, CliError> {
    let value = if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| CliError::validation("truth", e.to_string()))?
    } else {
        serde_json::json!({ "kind": s })
    };
    serde_json::from_value(value).map_err(|e| CliError::validation("truth", e.to_string()))
}

impl Flags {
    fn resolve(&self, subcommand: &str) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &c.subcommand {
            if s != subcommand {
                return Err(CliError::validation(
                    "subcommand",
                    format!("config is for `{s}`, not `{subcommand}`"),
                ));
            }
        }
        c.subcommand = Some(subcommand.to_owned());
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = &self.$f { c.$f = Some(v.clone()); })* };
        }
        set!(output_dir, seed, family, rho, sigma, sup_bound, n_grid, replicates, k, q, ks, n, xis);
        if let Some(t) = &self.truth {
            c.truth = Some(parse_truth(t)?);
        }
        if let Some(t) = &self.theta {
            c.theta = Some(t.split(',').map(parse_number).collect::<Result<_, _>>()?);
        }
        if let Some(d) = self.draws {
            c.mc = Some(sieve_core::posterior::McConfig {
                draws: d,
                ..c.mc.unwrap_or_default()
            });
        }
        if self.kmax.is_some()
            || self.qmax.is_some()
            || self.lmax.is_some()
            || self.level_max.is_some()
        {
            let family = c.family.ok_or_else(|| {
                CliError::validation("family", "is needed to truncate the lattice")
            })?;
            let mut t = c
                .truncation
                .unwrap_or_else(|| Truncation::default_for(family));
            if let Some(v) = self.kmax {
                t.k.1 = v;
            }
            if let Some(v) = self.qmax {
                t.q.1 = v;
            }
            if let Some(v) = self.lmax {
                t.bound.1 = v;
            }
            if let Some(v) = self.level_max {
                t.level.1 = v;
            }
            c.truncation = Some(t);
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match &cli.command {
        Command::Constants(f) => ("constants", f),
        Command::EntropyCheck(f) => ("entropy-check", f),
        Command::BoundsCheck(f) => ("bounds-check", f),
        Command::ApproxCheck(f) => ("approx-check", f),
        Command::DensitySim(f) => ("density-sim", f),
        Command::RegressionSim(f) => ("regression-sim", f),
        Command::Divergence(f) => ("divergence", f),
    };
    let cfg = flags.resolve(name)?;
    let job = || match name {
        "constants" => commands::constants(&cfg),
        "entropy-check" => commands::entropy_check(&cfg),
        "bounds-check" => commands::bounds_check(&cfg),
        "approx-check" => commands::approx_check(&cfg),
        "density-sim" => commands::simulate(&cfg, true),
        "regression-sim" => commands::simulate(&cfg, false),
        _ => commands::divergence(&cfg),
    };
    match flags.workers {
        Some(0) => Err(CliError::validation("workers", "must be positive")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(job),
        None => job(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sievepost: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
