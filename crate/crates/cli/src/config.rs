//! Settings file plus flag resolution. Precedence: flag, config file,
//! environment (seed only), built-in default.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::{Failure, GlobalArgs};

pub const SEED_ENV: &str = "TRENDCAST_SEED";
pub const DEFAULT_OUT: &str = "trendcast-out";

/// Every setting a command may read from `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lt_half: Option<bool>,
    pub model: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub horizon: Option<usize>,
    pub trajectories: Option<usize>,
    pub annualize: Option<bool>,
    pub pre: Option<String>,
    pub post: Option<String>,
    pub level: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::argument)?;
        serde_json::from_str(&text)
            .with_context(|| format!("config {}", path.display()))
            .map_err(Failure::argument)
    }
}

/// Settings shared by every command.
pub struct Settings {
    pub file: FileConfig,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn resolve(global: &GlobalArgs) -> Result<Settings, Failure> {
    let file = FileConfig::load(global.config.as_deref())?;
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))
                .map_err(Failure::argument)?,
        ),
        Err(_) => None,
    };
    let seed = global.seed.or(file.seed).or(env_seed).unwrap_or(0);
    let out = global
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok(Settings { file, seed, out })
}
