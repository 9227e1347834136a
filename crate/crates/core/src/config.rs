//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "multi_label_mae"
//! setting = "multi-label"        # or "single-label": train on majority labels
//! loss = "mae"                   # ce | mae | mse | huber
//! base_lr = 1e-5
//! schedule = "cosine_annealing"  # none | linear | cosine_annealing
//! cosine_restarts = false
//! epochs = 10
//! batch_size = 16
//! seeds = [1, 2, 3]
//! split_seed = 42
//! # grad_clip = 1.0
//!
//! [model]
//! dropout = 0.1
//! # trunk_width = 768
//!
//! [model.encoder]
//! model_id = "tiny-hash-64"
//! max_tokens = 256
//! pooling = "first-token"        # or "mean"
//!
//! [data]
//! discogem = "data/discogem.csv" # relative to the config file
//! pdtb = "data/pdtb_implicit.tsv"
//! delimiter = ","
//!
//! [data.columns]
//! id = "id"
//! arg1 = "arg1"
//! arg2 = "arg2"
//! genre = "genre"
//! ```
//!
//! `[data.synthetic]` with `instances` and `seed` replaces the corpus file
//! with a generated separable corpus.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnMap, SplitRatios};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::model::ModelConfig;
use crate::training::ScheduleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// Targets are the annotation distributions.
    MultiLabel,
    /// Targets are one-hot majority labels.
    SingleLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub discogem: Option<PathBuf>,
    #[serde(default)]
    pub pdtb: Option<PathBuf>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_pdtb_delimiter")]
    pub pdtb_delimiter: String,
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

fn default_delimiter() -> String {
    ",".into()
}
fn default_pdtb_delimiter() -> String {
    "\t".into()
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            discogem: None,
            pdtb: None,
            delimiter: default_delimiter(),
            pdtb_delimiter: default_pdtb_delimiter(),
            columns: ColumnMap::default(),
            ratios: SplitRatios::default(),
            synthetic: None,
        }
    }
}

fn delimiter_byte(text: &str, key: &str) -> Result<u8> {
    match text.as_bytes() {
        [b] => Ok(*b),
        _ if text == "\\t" || text.eq_ignore_ascii_case("tab") => Ok(b'\t'),
        _ => Err(Error::Config(format!("{key} must be a single character, got {text:?}"))),
    }
}

impl DataConfig {
    pub fn delimiter(&self) -> Result<u8> {
        delimiter_byte(&self.delimiter, "data.delimiter")
    }

    pub fn pdtb_delimiter(&self) -> Result<u8> {
        delimiter_byte(&self.pdtb_delimiter, "data.pdtb_delimiter")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_setting")]
    pub setting: Setting,
    pub loss: LossKind,
    pub base_lr: f64,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
    #[serde(default)]
    pub cosine_restarts: bool,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default)]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub data: DataConfig,
}

fn default_setting() -> Setting {
    Setting::MultiLabel
}
fn default_schedule() -> ScheduleKind {
    ScheduleKind::None
}
fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    16
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_split_seed() -> u64 {
    42
}

impl ExperimentConfig {
    /// A config with default hyperparameters and no data source.
    pub fn new(name: &str, loss: LossKind, base_lr: f64) -> ExperimentConfig {
        ExperimentConfig {
            name: name.to_string(),
            setting: default_setting(),
            loss,
            base_lr,
            schedule: default_schedule(),
            cosine_restarts: false,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            seeds: default_seeds(),
            split_seed: default_split_seed(),
            grad_clip: None,
            model: ModelConfig::default(),
            data: DataConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config =
            Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.data.discogem, &mut config.data.pdtb].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.name.trim().is_empty() {
            return fail("name must not be empty".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return fail(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return fail(format!("grad_clip must be positive, got {c}"));
            }
        }
        if self.data.discogem.is_some() && self.data.synthetic.is_some() {
            return fail("set either data.discogem or data.synthetic, not both".into());
        }
        self.data.delimiter()?;
        self.data.pdtb_delimiter()?;
        self.data.ratios.validate()?;
        self.model.validate()
    }

    /// Checks that every configured input file exists.
    pub fn check_paths(&self) -> Result<()> {
        if self.data.discogem.is_none() && self.data.synthetic.is_none() {
            return Err(Error::Config("no corpus configured: set data.discogem or data.synthetic".into()));
        }
        for p in [&self.data.discogem, &self.data.pdtb].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("corpus file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = \"x\"\nloss = \"ce\"\nbase_lr = 5e-6\nschedule = \"linear\"\n";

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!((c.epochs, c.batch_size), (10, 16));
        assert_eq!(c.seeds.len(), 3);
        assert_eq!(c.schedule, ScheduleKind::Linear);
        assert_eq!(c.model.dropout, 0.1);
        assert_eq!(c.model.encoder.max_tokens, 256);
        assert_eq!(c.data.delimiter().unwrap(), b',');
    }

    #[test]
    fn unknown_loss_lists_choices() {
        let err = ExperimentConfig::from_toml(&MINIMAL.replace("\"ce\"", "\"l1\"")).unwrap_err();
        let text = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        for choice in ["ce", "mae", "mse", "huber"] {
            assert!(text.contains(choice), "{text}");
        }
    }

    #[test]
    fn invalid_values() {
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}epochs = 0\n")).is_err());
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("5e-6", "0.0")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}[model]\ndropout = 1.0\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}typo = 3\n")).is_err());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.base_lr = 1e-5;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn missing_corpus_is_config_error() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert!(matches!(c.check_paths(), Err(Error::Config(_))));
        c.data.discogem = Some("/nonexistent/discogem.csv".into());
        assert!(matches!(c.check_paths(), Err(Error::Config(_))));
    }
}
