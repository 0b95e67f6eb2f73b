//! Run configuration (`config.json`). Every key has a default, so `{}` is a
//! valid configuration for a mock run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::build::DEFAULT_ERROR_PATTERN;
use crate::clock::Clock;
use crate::llm::{HttpSettings, Price};
use crate::metrics::Difficulty;
use crate::planning::DEFAULT_MAX_SETS;
use crate::repair::RetryPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Read { path: String, detail: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub request_timeout_seconds: u64,
    pub transport_retries: u32,
    pub prices: BTreeMap<String, Price>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_id: "gpt-4.1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: 0.0,
            request_timeout_seconds: 300,
            transport_retries: 3,
            prices: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub command: Vec<String>,
    pub timeout_seconds: u64,
    pub error_pattern: String,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            command: vec!["./gradlew".into(), "assembleDebug".into()],
            timeout_seconds: 600,
            error_pattern: DEFAULT_ERROR_PATTERN.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsConfig {
    pub elementary_minutes: f64,
    pub intermediate_minutes: f64,
    pub advanced_minutes: f64,
    /// Overrides the difficulty-based limit when set.
    pub time_limit_minutes: Option<f64>,
    pub coding_max_turns: u32,
    pub debug_max_attempts: u32,
    pub parse_retries: u32,
    pub repair_rounds: u32,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            elementary_minutes: 30.0,
            intermediate_minutes: 40.0,
            advanced_minutes: 50.0,
            time_limit_minutes: None,
            coding_max_turns: 40,
            debug_max_attempts: 10,
            parse_retries: 3,
            repair_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub app_name: Option<String>,
    pub provider: ProviderConfig,
    pub max_feature_sets: usize,
    pub build: BuildConfig,
    pub limits: LimitsConfig,
    /// Scripted transcript; when present the run uses the mock provider.
    pub transcript: Option<PathBuf>,
    /// When set, timestamps come from a logical clock advancing this many
    /// milliseconds per reading.
    pub logical_clock_step_ms: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            app_name: None,
            provider: ProviderConfig::default(),
            max_feature_sets: DEFAULT_MAX_SETS,
            build: BuildConfig::default(),
            limits: LimitsConfig::default(),
            transcript: None,
            logical_clock_step_ms: None,
        }
    }
}

impl RunConfig {
    /// Parses `path`; a relative transcript path is taken relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let (Some(t), Some(dir)) = (&config.transcript, path.parent()) {
            if t.is_relative() {
                config.transcript = Some(dir.join(t));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let l = &self.limits;
        let mut problems = Vec::new();
        if self.max_feature_sets < 1 {
            problems.push("max_feature_sets must be at least 1".to_string());
        }
        for (name, v) in [
            ("elementary_minutes", l.elementary_minutes),
            ("intermediate_minutes", l.intermediate_minutes),
            ("advanced_minutes", l.advanced_minutes),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("limits.{name} must be positive"));
            }
        }
        if let Some(v) = l.time_limit_minutes {
            if !(v > 0.0 && v.is_finite()) {
                problems.push("limits.time_limit_minutes must be positive".into());
            }
        }
        if l.coding_max_turns < 1 {
            problems.push("limits.coding_max_turns must be at least 1".into());
        }
        if l.debug_max_attempts < 1 {
            problems.push("limits.debug_max_attempts must be at least 1".into());
        }
        if self.build.command.is_empty() {
            problems.push("build.command must not be empty".into());
        }
        if let Err(e) = regex::Regex::new(&self.build.error_pattern) {
            problems.push(format!("build.error_pattern: {e}"));
        }
        if self.provider.model_id.is_empty() {
            problems.push("provider.model_id must not be empty".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }

    pub fn time_limit(&self, difficulty: Difficulty) -> Duration {
        let l = &self.limits;
        let minutes = l.time_limit_minutes.unwrap_or(match difficulty {
            Difficulty::Elementary => l.elementary_minutes,
            Difficulty::Intermediate => l.intermediate_minutes,
            Difficulty::Advanced => l.advanced_minutes,
        });
        Duration::from_secs_f64(minutes * 60.0)
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            parse_retries: self.limits.parse_retries,
            repair_rounds: self.limits.repair_rounds,
        }
    }

    pub fn clock(&self) -> Clock {
        match self.logical_clock_step_ms {
            Some(step) => Clock::logical(step),
            None => Clock::System,
        }
    }

    /// HTTP settings with the key read from the configured environment variable.
    pub fn http_settings(&self) -> Result<HttpSettings, ConfigError> {
        let env = &self.provider.api_key_env;
        let api_key = std::env::var(env).map_err(|_| ConfigError::MissingApiKey(env.clone()))?;
        Ok(HttpSettings {
            base_url: self.provider.base_url.clone(),
            api_key,
            request_timeout: Duration::from_secs(self.provider.request_timeout_seconds),
            transport_retries: self.provider.transport_retries,
            backoff_base: Duration::from_secs(1),
        })
    }
}
