//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use assertgen_core::dialogue::GenerationConfig;
use assertgen_core::metrics::LcsUnit;

use crate::harness::RunnerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlmMode {
    Live,
    Record,
    Replay,
}

impl FromStr for LlmMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(LlmMode::Live),
            "record" => Ok(LlmMode::Record),
            "replay" => Ok(LlmMode::Replay),
            other => Err(format!("unknown llm.mode `{other}` (live, record or replay)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Syntax { path: String, line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub mode: LlmMode,
    pub replay_path: Option<PathBuf>,
    pub max_retries: u32,
    pub request_timeout_s: u64,
    pub max_response_chars: usize,
    pub workers: usize,
    pub timeout_s: u64,
    pub max_prompt_chars: usize,
    pub runner: String,
    pub structured: bool,
    pub shim_dir: Option<PathBuf>,
    pub template_dir: Option<PathBuf>,
    pub table_path: Option<PathBuf>,
    pub lcs_unit: LcsUnit,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GenerationConfig::default();
        RunConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: g.model_name,
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: g.temperature,
            mode: LlmMode::Live,
            replay_path: None,
            max_retries: g.max_retries,
            request_timeout_s: g.request_timeout_s,
            max_response_chars: g.max_response_chars,
            workers: 1,
            timeout_s: 60,
            max_prompt_chars: crate::analyzer::DEFAULT_MAX_PROMPT_CHARS,
            runner: "python3 -m pytest".into(),
            structured: false,
            shim_dir: None,
            template_dir: None,
            table_path: None,
            lcs_unit: LcsUnit::Char,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), msg: e.to_string() })
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && (v.starts_with('"') && v.ends_with('"') || v.starts_with('\'') && v.ends_with('\'')) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = unquote(value);
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "llm.endpoint" => self.endpoint = value.into(),
            "llm.model" => self.model = value.into(),
            "llm.api_key_env" => self.api_key_env = value.into(),
            "llm.temperature" => self.temperature = parse_value(key, value)?,
            "llm.mode" => self.mode = parse_value(key, value)?,
            "llm.replay_path" => self.replay_path = path(),
            "llm.max_retries" => self.max_retries = parse_value(key, value)?,
            "llm.request_timeout_s" => self.request_timeout_s = parse_value(key, value)?,
            "llm.max_response_chars" => self.max_response_chars = parse_value(key, value)?,
            "pipeline.workers" => self.workers = parse_value(key, value)?,
            "pipeline.timeout_s" => self.timeout_s = parse_value(key, value)?,
            "pipeline.max_prompt_chars" => self.max_prompt_chars = parse_value(key, value)?,
            "pipeline.runner" => self.runner = value.into(),
            "pipeline.structured" => self.structured = parse_value(key, value)?,
            "pipeline.shim_dir" => self.shim_dir = path(),
            "prompt.template_dir" => self.template_dir = path(),
            "metrics.table_path" => self.table_path = path(),
            "metrics.lcs_unit" => self.lcs_unit = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: origin.into(),
                    line: n + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<(), ConfigError> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("override `{pair}` is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.generation().validate().map_err(ConfigError::Invalid)?;
        if self.mode == LlmMode::Replay && self.replay_path.is_none() {
            return Err(ConfigError::Invalid("llm.mode = replay needs llm.replay_path".into()));
        }
        if self.mode == LlmMode::Record && self.replay_path.is_none() {
            return Err(ConfigError::Invalid("llm.mode = record needs llm.replay_path".into()));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("pipeline.workers must be at least 1".into()));
        }
        if self.runner.split_whitespace().next().is_none() {
            return Err(ConfigError::Invalid("pipeline.runner is empty".into()));
        }
        Ok(())
    }

    /// The API key, read from the environment variable named by `llm.api_key_env`.
    pub fn api_key(&self) -> Result<String, ConfigError> {
        std::env::var(&self.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ConfigError::Invalid(format!("environment variable {} is not set", self.api_key_env)))
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            temperature: self.temperature,
            max_response_chars: self.max_response_chars,
            model_name: self.model.clone(),
            request_timeout_s: self.request_timeout_s,
            max_retries: self.max_retries,
        }
    }

    pub fn runner(&self) -> RunnerConfig {
        RunnerConfig {
            command: self.runner.split_whitespace().map(String::from).collect(),
            timeout: Duration::from_secs(self.timeout_s),
            structured: self.structured,
            shim_dir: self.shim_dir.clone(),
            zero_durations: self.mode == LlmMode::Replay,
            ..RunnerConfig::default()
        }
    }
}
