use std::fs;
use std::path::{Path, PathBuf};

use rmflow_core::model::{ModelConfig, Variant};
use rmflow_core::sample::SampleConfig;
use rmflow_core::scene::{Mode, SceneGenParams};
use rmflow_core::train::TrainConfig;
use rmflow_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a command needs, as read from `--config` and then
/// overridden by flags. `seed` drives scene, training and sampling seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub scene: SceneGenParams,
    pub variant: Variant,
    pub spatial_attention: bool,
    pub ema: bool,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    /// Scenes timed by `sample`.
    pub n_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            n_train: 64,
            n_test: 16,
            seed: 0,
            scene: SceneGenParams::default(),
            variant: Variant::Lite,
            spatial_attention: true,
            ema: true,
            train: TrainConfig::default(),
            sample: SampleConfig::default(),
            n_samples: 50,
        }
    }
}

impl RunConfig {
    /// Reads either a bare config or a `run.json` written by a previous run.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Load { path: path.into(), reason: e.to_string() })?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Load { path: path.into(), reason: e.to_string() })?;
        let inner = match value.get("config") {
            Some(c) => c.clone(),
            None => value,
        };
        serde_json::from_value(inner).map_err(|e| Error::Load { path: path.into(), reason: e.to_string() })
    }

    /// Copies `seed` into the per-module configs.
    pub fn resolve_seeds(&mut self) {
        self.train.seed = self.seed;
        self.sample.seed = self.seed;
        self.train.track_ema = self.ema;
    }

    pub fn model_config(&self, mode: Mode) -> ModelConfig {
        ModelConfig::for_variant(self.variant, mode.cond_channels()).with_spatial_attention(self.spatial_attention)
    }
}

/// The manifest every command writes next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub extra: serde_json::Value,
}
