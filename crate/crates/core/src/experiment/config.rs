//! Suite configuration file.
//!
//! A JSON object; every section is optional except `data`, and unknown keys
//! anywhere are rejected with the offending key path. A run manifest is
//! also accepted, in which case its embedded `config` is used.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::federated::{ScheduleKind, TrainConfig};
use crate::langmodel::ModelConfig;

use super::MANIFEST_FORMAT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Master seeds; every schedule runs once per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_schedules")]
    pub schedules: Vec<ScheduleKind>,
    #[serde(default)]
    pub latency_sweep: Option<SweepConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_schedules() -> Vec<ScheduleKind> {
    ScheduleKind::ALL.to_vec()
}

/// Where the clients come from. Exactly one source must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
    #[serde(default)]
    pub synthetic: Option<SynthConfig>,
    /// Tab-separated corpus file.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Preprocessed population cache; its vocabulary and split are used as is.
    #[serde(default)]
    pub population: Option<PathBuf>,
}

fn default_vocab() -> usize {
    2000
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            vocab_size: default_vocab(),
            synthetic: Some(SynthConfig::default()),
            corpus: None,
            population: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
        }
    }
}

impl ModelSection {
    pub fn config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            seq_len: crate::data::SEQ_LEN,
        }
    }
}

/// Grid for the latency sweep report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub populations: Vec<u64>,
    pub cohorts: Vec<u64>,
    pub eligible_frac: f64,
    pub sample_rate: f64,
    #[serde(default = "one")]
    pub rate_lambda: f64,
}

fn one() -> f64 {
    1.0
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let sources = [
            self.data.synthetic.is_some(),
            self.data.corpus.is_some(),
            self.data.population.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::config(
                "data",
                "exactly one of `synthetic`, `corpus`, `population` must be set",
            ));
        }
        if let Some(s) = &self.data.synthetic {
            s.validate().map_err(|e| Error::config("data.synthetic", e.to_string()))?;
        }
        self.model
            .config(self.data.vocab_size)
            .validate()
            .map_err(|e| Error::config("model", e.to_string()))?;
        if self.schedules.is_empty() {
            return Err(Error::config("schedules", "at least one schedule is required"));
        }
        for kind in &self.schedules {
            self.train
                .validate(*kind)
                .map_err(|e| Error::config("train", e.to_string()))?;
        }
        Ok(())
    }

    /// Makes relative data paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.corpus, &mut self.data.population].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Parses a config (or manifest) document, reporting the key path of the
/// first schema violation.
pub fn parse_config(text: &str) -> Result<SuiteConfig> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::config("$", format!("invalid JSON: {e}")))?;
    if value.get("format").and_then(|f| f.as_str()) == Some(MANIFEST_FORMAT) {
        value = value
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| Error::config("config", "manifest has no embedded config"))?;
    }
    let cfg: SuiteConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path.is_empty() { "$".into() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SuiteConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}
