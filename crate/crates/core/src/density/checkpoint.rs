use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ConditionalDensityModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "simcal-model";

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

/// Writes the model (config, standardizer, weights and RFF map) as JSON.
pub fn save_checkpoint(model: &ConditionalDensityModel, path: impl AsRef<Path>) -> Result<()> {
    let env = Envelope {
        format: CHECKPOINT_FORMAT.to_owned(),
        version: CHECKPOINT_VERSION,
        model,
    };
    let text = serde_json::to_string(&env).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ConditionalDensityModel> {
    let text = fs::read_to_string(path)?;
    let env: Envelope<ConditionalDensityModel> =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if env.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unexpected format '{}'", env.format)));
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            env.version
        )));
    }
    Ok(env.model)
}
