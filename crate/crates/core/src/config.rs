//! Configuration file: `[model]`, `[evaluator]`, `[optimizer]`, `[validation]`
//! and `[proxy]` tables. Every key is optional. The API key is deliberately
//! not a config key; it is read from `QUEST_API_KEY` only.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::gateway::{HttpConfig, ModelSettings};
use crate::model::{OptimizerConfig, MAX_SCORE};
use crate::proxy::ProxyConfig;
use crate::validation::ValidationConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("config {path} must not contain an API key; set QUEST_API_KEY instead")]
    SecretInFile { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub base_url: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub timeout_secs: f64,
    pub max_retries: u32,
}

impl Default for ModelSection {
    fn default() -> Self {
        let settings = ModelSettings::default();
        let http = HttpConfig::default();
        Self {
            name: settings.name,
            base_url: http.base_url,
            temperature: settings.temperature,
            seed: settings.seed,
            timeout_secs: http.timeout.as_secs_f64(),
            max_retries: http.max_attempts,
        }
    }
}

impl ModelSection {
    pub fn settings(&self) -> ModelSettings {
        ModelSettings {
            name: self.name.clone(),
            temperature: self.temperature,
            seed: self.seed,
        }
    }

    pub fn http(&self) -> HttpConfig {
        HttpConfig {
            base_url: self.base_url.clone(),
            timeout: Duration::from_secs_f64(self.timeout_secs.max(0.0)),
            max_attempts: self.max_retries.max(1),
            ..HttpConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorSection {
    pub self_consistency: u32,
    pub parallelism: usize,
    /// Custom statement catalog (TOML or JSON).
    pub catalog: Option<PathBuf>,
}

impl Default for EvaluatorSection {
    fn default() -> Self {
        Self {
            self_consistency: 1,
            parallelism: 1,
            catalog: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iterations: u32,
    pub target_score: f64,
    pub run_tests: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            target_score: MAX_SCORE,
            run_tests: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestConfig {
    pub model: ModelSection,
    pub evaluator: EvaluatorSection,
    pub optimizer: OptimizerSection,
    pub validation: ValidationConfig,
    pub proxy: ProxyConfig,
}

impl QuestConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigFileError> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| ConfigFileError::Invalid {
            path: origin.to_string(),
            message: e.message().to_string(),
        })?;
        if contains_secret(&raw) {
            return Err(ConfigFileError::SecretInFile {
                path: origin.to_string(),
            });
        }
        toml::from_str(text).map_err(|e| ConfigFileError::Invalid {
            path: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text, &path.display().to_string())?;
        // A relative catalog path is relative to the config file.
        if let (Some(catalog), Some(dir)) = (&config.evaluator.catalog, path.parent()) {
            if catalog.is_relative() {
                config.evaluator.catalog = Some(dir.join(catalog));
            }
        }
        Ok(config)
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iterations: self.optimizer.max_iterations,
            target_score: self.optimizer.target_score,
            self_consistency_k: self.evaluator.self_consistency,
            run_tests: self.optimizer.run_tests,
        }
    }
}

fn contains_secret(table: &toml::Table) -> bool {
    table.iter().any(|(key, value)| {
        let k = key.to_ascii_lowercase();
        k.contains("api_key") || k.contains("apikey") || value.as_table().is_some_and(contains_secret)
    })
}
