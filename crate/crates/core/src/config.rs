//! Run configuration: one TOML document with a strict schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::model::ModelConfig;
use crate::simgen::SimConfig;
use crate::train::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a pipeline stage needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Default output directory; `--out` takes precedence.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub sim: SimConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Full-scale simulation with default training and evaluation settings.
    pub fn full_scale(seed: u64) -> Self {
        Self::with_sim(SimConfig::full_scale(seed))
    }

    pub fn desk_scale(seed: u64) -> Self {
        Self::with_sim(SimConfig::desk_scale(seed))
    }

    fn with_sim(sim: SimConfig) -> Self {
        let seed = sim.seed;
        Self {
            version: CONFIG_VERSION,
            out_dir: default_out_dir(),
            sim,
            model: ModelConfig::default(),
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            eval: EvalConfig {
                seed,
                ..EvalConfig::default()
            },
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        config.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{origin}: {msg}")),
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.sim.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }

    /// Replaces the simulation, training and evaluation seeds.
    pub fn override_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
    }

    /// Fully resolved document with every default written out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}
