//! Run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sieve_core::entropy::EntropyConfig;
use sieve_core::harness::experiment::RadiusRule;
use sieve_core::harness::TruthSpec;
use sieve_core::posterior::{McConfig, Metric};
use sieve_core::sieve::{EtaMode, ModelIndex, RegressionParams, SieveConfig, Truncation};
use sieve_core::Family;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SIEVEPOST_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "sievepost-out";

/// Everything a run needs. Unused keys are ignored by subcommands that do not read them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_mode: Option<EtaMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Sup bound `M` on regression functions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<RadiusRule>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Single model for `entropy-check` and `bounds-check`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
    /// Sample size for `bounds-check`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Theta-grid size for `bounds-check`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

impl RunConfig {
    /// Reads a config file. A JSON summary written by an earlier run is accepted too: its
    /// `config` member is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation("config", format!("cannot read `{}`: {e}", path.display()))
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| {
            CliError::validation(
                "config",
                format!("`{}` is not valid JSON: {e}", path.display()),
            )
        })?;
        let value = match value {
            Value::Object(mut map)
                if map.contains_key("config") && !map.contains_key("subcommand") =>
            {
                map.remove("config").unwrap_or_default()
            }
            v => v,
        };
        serde_json::from_value(value)
            .map_err(|e| CliError::validation("config", format!("`{}`: {e}", path.display())))
    }

    pub fn require<T: Clone>(field: &Option<T>, key: &'static str) -> Result<T, CliError> {
        field
            .clone()
            .ok_or_else(|| CliError::validation(key, "is required by this subcommand"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
        })
    }

    pub fn family(&self) -> Result<Family, CliError> {
        Self::require(&self.family, "family")
    }

    pub fn regression_params(&self) -> Result<RegressionParams, CliError> {
        let sigma = Self::require(&self.sigma, "sigma")?;
        let m = Self::require(&self.sup_bound, "sup_bound")?;
        let mut p = RegressionParams::new(sigma, m)?;
        if let Some(c0) = self.c0 {
            p.c0 = c0;
            p.validate()?;
        }
        Ok(p)
    }

    pub fn sieve(&self) -> Result<SieveConfig, CliError> {
        let family = self.family()?;
        let truncation = self
            .truncation
            .unwrap_or_else(|| Truncation::default_for(family));
        let mut cfg = if family.is_density() {
            SieveConfig::density(family, truncation)
        } else {
            SieveConfig::regression(self.regression_params()?, truncation)
        };
        cfg.rho = self.rho;
        cfg.eta_mode = self.eta_mode.unwrap_or_default();
        Ok(cfg)
    }
}
