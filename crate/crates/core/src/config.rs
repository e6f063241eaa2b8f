//! Run configuration: one TOML file covering the generator, graph
//! construction, model architecture, optimizer, and splits. Every field
//! has a default, so partial files are fine.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SplitFractions;
use crate::error::{Error, Result};
use crate::model::{GraphParams, ModelConfig, TrainConfig};
use crate::synth::GenConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Default seed; the CLI `--seed` flag overrides it.
    pub seed: u64,
    pub synth: GenConfig,
    pub graphs: GraphParams,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitFractions,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| {
            Error::Config(format!("bad config {}: {e}", path.display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.split.validate()?;
        if self.train.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::State(format!("config serialization failed: {e}")))
    }
}
