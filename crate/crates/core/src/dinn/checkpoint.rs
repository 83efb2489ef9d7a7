use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DinnModel, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized trained network: shapes, weights, raw parameters, scales and
/// the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub model: DinnModel,
}

impl Checkpoint {
    pub fn new(model: DinnModel, config: TrainConfig) -> Self {
        Self { version: CHECKPOINT_VERSION, seed: config.seed, config, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        let net = &ck.model.net;
        let chained = net.layers.windows(2).all(|w| w[0].out == w[1].inp)
            && net.layers.iter().all(|l| l.w.len() == l.inp * l.out && l.b.len() == l.out);
        if !chained || net.out_dim() != ck.model.model.dim() || ck.model.comp_scale.len() != ck.model.model.dim() {
            return Err(Error::Dimension("checkpoint layer shapes are inconsistent".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
