use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::FasnetConfig;
use super::model::{FasnetModel, Param};
use super::train::{OptimizerState, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Model weights plus, for training runs, the optimizer state needed to resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config: FasnetConfig,
    pub step: usize,
    pub params: Vec<Param>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn from_model(model: &FasnetModel) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            step: 0,
            params: model.params.clone(),
            train: None,
            optimizer: None,
        }
    }

    pub fn model(&self) -> Result<FasnetModel> {
        let model = FasnetModel {
            config: self.config.clone(),
            params: self.params.clone(),
        };
        model.check_layout()?;
        if !model.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters"));
        }
        Ok(model)
    }

    /// Like [`Checkpoint::model`] but also requires the stored architecture to equal
    /// `expected`.
    pub fn model_for(&self, expected: &FasnetConfig) -> Result<FasnetModel> {
        if &self.config != expected {
            return Err(Error::Config(format!(
                "checkpoint config {:?} does not match requested {:?}",
                self.config, expected
            )));
        }
        self.model()
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(ckpt)?;
    // write-then-rename so an interrupted save never leaves a truncated file behind
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!("unsupported version {}", ckpt.version),
        });
    }
    Ok(ckpt)
}
