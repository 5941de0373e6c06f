//! The run configuration file.
//!
//! Relative paths are resolved against the directory holding the config.
//! A `categories` value of the form `bundled:<task>` selects one of the
//! inventories shipped with the library.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spanagree::annotator::AnnotatorConfig;
use spanagree::gamma::GammaConfig;
use spanagree::ingest::{self, bundled, CategoryFile};
use spanagree::metrics::MatchMode;
use spanagree::model::Task;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub categories: String,
    /// Campaign id to file. `.tsv` files are read as offset tables.
    #[serde(default)]
    pub campaigns: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    pub output_dir: PathBuf,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://host/v1`.
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

fn default_modes() -> Vec<MatchMode> {
    vec![MatchMode::Hard, MatchMode::Soft]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default)]
    pub gamma: GammaConfig,
    /// Modes reported in the summary table.
    #[serde(default = "default_modes")]
    pub match_modes: Vec<MatchMode>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            gamma: GammaConfig::default(),
            match_modes: default_modes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Json, ReportFormat::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            formats: default_formats(),
        }
    }
}

impl ReportConfig {
    pub fn wants(&self, format: ReportFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<AnnotatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

/// Values given on the command line that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// A validated config with paths made absolute.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub output_dir: PathBuf,
    /// SHA-256 of the config as written, after overrides.
    pub hash: String,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.config.paths.corpus)
    }

    pub fn cache_path(&self) -> Option<PathBuf> {
        self.config.paths.cache.as_deref().map(|p| self.resolve(p))
    }

    pub fn category_file(&self) -> Result<CategoryFile, CliError> {
        let spec = &self.config.paths.categories;
        match spec.strip_prefix("bundled:") {
            Some(name) => {
                let task: Task = serde_json::from_value(serde_json::Value::String(name.to_owned()))
                    .map_err(|_| CliError::config(format!("unknown bundled category set {name:?}")))?;
                let text = bundled::for_task(task)
                    .ok_or_else(|| CliError::config(format!("no bundled category set for {name:?}")))?;
                Ok(ingest::parse_category_file(text, Path::new(spec))?)
            }
            None => Ok(ingest::load_category_file(&self.resolve(Path::new(spec)))?),
        }
    }

    pub fn campaign_path(&self, id: &str) -> Result<PathBuf, CliError> {
        let path = self
            .config
            .paths
            .campaigns
            .get(id)
            .ok_or_else(|| CliError::config(format!("no campaign {id:?} in config")))?;
        let path = self.resolve(path);
        if !path.exists() {
            return Err(CliError::config(format!("campaign {id:?} file {} does not exist", path.display())));
        }
        Ok(path)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
}

/// Read, override, validate and hash a config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = overrides.seed {
        config.metrics.gamma.seed = seed;
        if let Some(annotator) = config.annotator.as_mut() {
            annotator.seed = seed;
        }
    }
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_owned)
        .unwrap_or_else(|| PathBuf::from("."));
    let output_dir = match &overrides.output {
        Some(dir) => {
            config.paths.output_dir = dir.clone();
            dir.clone()
        }
        None => base_dir.join(&config.paths.output_dir),
    };

    config
        .metrics
        .gamma
        .validate()
        .map_err(|e| CliError::config(format!("invalid gamma settings: {e}")))?;
    if let Some(annotator) = &config.annotator {
        annotator.validate().map_err(|e| CliError::config(e.to_string()))?;
    }
    let hash = hex::encode(Sha256::digest(
        serde_json::to_string(&config).expect("config serializes").as_bytes(),
    ));
    let loaded = LoadedConfig {
        config,
        base_dir,
        output_dir,
        hash,
    };
    let corpus = loaded.corpus_path();
    if !corpus.is_file() {
        return Err(CliError::config(format!("corpus {} does not exist", corpus.display())));
    }
    loaded.category_file()?;
    Ok(loaded)
}
