//! Experiment files: flat JSON objects whose keys mirror the long flags
//! (with underscores). A flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rll_core::confidence::ConfidenceMode;
use rll_core::eval::{LogRegConfig, Method};
use rll_core::synth::SynthConfig;
use rll_core::truth::EmConfig;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::args::SweepParam;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset file, resolved against the config file's directory.
    pub data: Option<PathBuf>,
    /// Generate the dataset in memory instead of reading `data`.
    pub synth: Option<SynthConfig>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    pub prior_strength: Option<f64>,
    pub class_ratio: Option<f64>,

    pub k: Option<usize>,
    pub groups_per_epoch: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub eta: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub init_scale: Option<f64>,
    pub logreg: Option<LogRegConfig>,
    pub em: Option<EmConfig>,

    pub methods: Option<Vec<Method>>,
    pub method: Option<Method>,
    pub folds: Option<usize>,
    pub sweep: Option<SweepParam>,
    pub values: Option<Vec<usize>>,
    pub mode: Option<ConfidenceMode>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let mut cfg: Self = read_json(path)?;
        if let (Some(data), Some(dir)) = (cfg.data.as_mut(), path.parent()) {
            if data.is_relative() {
                *data = dir.join(&*data);
            }
        }
        Ok(cfg)
    }
}
