use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use resilience_core::synth::SyntheticCitySpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::InputError;

/// Settings shared by every subcommand. Loaded from a TOML file and then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Station and route CSVs; when both are absent the synthetic city is used.
    pub stations: Option<PathBuf>,
    pub routes: Option<PathBuf>,
    pub city: SyntheticCitySpec,
    pub core_only: bool,
    pub d_imt: f64,
    pub seed: u64,
    pub od_samples: usize,
    pub exhaustive_od: bool,
    pub repeats: usize,
    pub replicas: usize,
    pub d_max: Vec<f64>,
    pub cascade_beta: f64,
    pub betas: Vec<f64>,
    pub shock_sizes: Vec<usize>,
    pub pareto_d_imt: Vec<f64>,
    pub stepwise_d_imt: Vec<f64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stations: None,
            routes: None,
            city: SyntheticCitySpec::default(),
            core_only: true,
            d_imt: 100.0,
            seed: 42,
            od_samples: 10_000,
            exhaustive_od: false,
            repeats: 50,
            replicas: 50,
            d_max: vec![750.0, 1600.0],
            cascade_beta: 0.2,
            betas: (0..=20).map(|i| i as f64 * 0.05).collect(),
            shock_sizes: vec![1, 2, 5, 10, 20],
            pareto_d_imt: vec![0.0, 50.0, 100.0, 150.0, 200.0],
            stepwise_d_imt: vec![0.0, 100.0],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read config `{}`: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| InputError(format!("bad config `{}`: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let check = || -> anyhow::Result<()> {
            if self.stations.is_some() != self.routes.is_some() {
                bail!("stations and routes must be given together");
            }
            if self.repeats == 0 {
                bail!("repeats must be at least 1");
            }
            if self.replicas < 2 {
                bail!("replicas must be at least 2");
            }
            if !(self.d_imt.is_finite() && self.d_imt >= 0.0) {
                bail!("d_imt must be a non-negative number");
            }
            if self.d_max.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                bail!("d_max values must be positive");
            }
            if self.betas.windows(2).any(|w| w[0] > w[1]) || self.betas.iter().any(|b| !(*b >= 0.0)) {
                bail!("betas must be non-negative and ascending");
            }
            if self.pareto_d_imt.windows(2).any(|w| w[0] > w[1]) {
                bail!("pareto_d_imt must be ascending");
            }
            if self.od_samples == 0 && !self.exhaustive_od {
                bail!("od_samples must be at least 1");
            }
            Ok(())
        };
        check().map_err(|e| InputError(format!("invalid config: {e}")).into())
    }

    /// SHA-256 of the settings that determine results; the output
    /// directory is excluded.
    pub fn hash(&self) -> anyhow::Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).context("serializing config")?;
        Ok(hex::encode(Sha256::digest(json)))
    }
}
