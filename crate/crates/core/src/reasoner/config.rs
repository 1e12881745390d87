use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReasonerError;
use crate::pipeline::PipelineMode;

/// Environment variable holding the bearer token for live calls.
pub const API_KEY_ENV: &str = "RAC_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasonerMode {
    Live,
    Record,
    Replay,
    Mock,
}

impl std::str::FromStr for ReasonerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(ReasonerMode::Live),
            "record" => Ok(ReasonerMode::Record),
            "replay" => Ok(ReasonerMode::Replay),
            "mock" => Ok(ReasonerMode::Mock),
            other => Err(format!(
                "unknown mode `{other}` (expected live, record, replay or mock)"
            )),
        }
    }
}

/// What record mode forwards cache misses to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordBackend {
    #[default]
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Sampling temperature for self-consistency.
    pub sc_temperature: f64,
    pub max_tokens: u32,
    /// Instances evaluated concurrently.
    pub parallelism: usize,
    /// Attempts per live request, including the first.
    pub retry_max: u32,
    pub mode: ReasonerMode,
    pub cache_dir: Option<PathBuf>,
    pub record_backend: RecordBackend,
    /// Unset means nl when answers come from a model, structured under the mock.
    pub pipeline_mode: Option<PipelineMode>,
    pub requests_per_minute: Option<u32>,
    pub max_concurrent_requests: usize,
    pub timeout_secs: u64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            sc_temperature: 0.7,
            max_tokens: 2048,
            parallelism: 4,
            retry_max: 5,
            mode: ReasonerMode::Mock,
            cache_dir: None,
            record_backend: RecordBackend::Live,
            pipeline_mode: None,
            requests_per_minute: None,
            max_concurrent_requests: 4,
            timeout_secs: 120,
        }
    }
}

impl ReasonerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ReasonerError> {
        let cfg: ReasonerConfig = toml::from_str(text)
            .map_err(|e| ReasonerError::InvalidRequest(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ReasonerError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReasonerError::CacheIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ReasonerError> {
        let bad = |m: String| Err(ReasonerError::InvalidRequest(format!("config: {m}")));
        if [self.temperature, self.sc_temperature]
            .iter()
            .any(|t| t.is_nan() || *t < 0.0)
        {
            return bad("temperatures must be >= 0".into());
        }
        if self.parallelism == 0 || self.max_concurrent_requests == 0 {
            return bad("parallelism and max_concurrent_requests must be at least 1".into());
        }
        if self.retry_max == 0 {
            return bad("retry_max must be at least 1".into());
        }
        if matches!(self.mode, ReasonerMode::Record | ReasonerMode::Replay)
            && self.cache_dir.is_none()
        {
            return bad(format!("mode {:?} requires cache_dir", self.mode).to_lowercase());
        }
        Ok(())
    }

    pub fn effective_pipeline_mode(&self) -> PipelineMode {
        if let Some(m) = self.pipeline_mode {
            return m;
        }
        match (self.mode, self.record_backend) {
            (ReasonerMode::Mock, _) | (ReasonerMode::Record, RecordBackend::Mock) => {
                PipelineMode::Structured
            }
            _ => PipelineMode::Nl,
        }
    }

    /// Reads the API key; only needed when live calls can happen.
    pub fn api_key(&self) -> Result<String, ReasonerError> {
        std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ReasonerError::MissingCredentials(API_KEY_ENV.into()))
    }

    pub fn needs_live(&self) -> bool {
        match self.mode {
            ReasonerMode::Live => true,
            ReasonerMode::Record => self.record_backend == RecordBackend::Live,
            ReasonerMode::Replay | ReasonerMode::Mock => false,
        }
    }
}
