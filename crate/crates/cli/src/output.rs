use std::fs;
use std::path::Path;

use bouts_core::{BoostConfig, BoutsModel, Standardizer};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::config::CliError;

pub const MODEL_FORMAT: u32 = 1;

/// What `fit` writes as model.json: the fitted ensemble in standardized
/// units plus the per-task scalers needed to predict raw CSV rows.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: u32,
    pub split_seed: u64,
    pub config: BoostConfig,
    pub standardizers: IndexMap<String, Standardizer>,
    pub model: BoutsModel,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectedFeatures {
    pub universal: Vec<String>,
    pub task_specific: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectedLambda {
    pub index: usize,
    pub lambda: f64,
    pub log_lambda: f64,
    pub drop: f64,
    /// True when even the smallest penalty loses more than `drop`.
    pub warning: bool,
    pub universal: Vec<String>,
    pub task_specific: IndexMap<String, Vec<String>>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Task names reduced to characters that are safe in file names.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
