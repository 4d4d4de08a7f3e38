use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::callgraph::DEFAULT_MAX_DEPTH;
use crate::corpus::{FilterConfig, DEFAULT_RATIOS};
use crate::promptgen::{AblationMask, DEFAULT_INNER_LINE_BUDGET};
use crate::retrieval::DEFAULT_DIMS;

/// Prefix of environment variables overriding config keys, e.g.
/// `SOLSUM_SHOTS=3`.
pub const ENV_PREFIX: &str = "SOLSUM_";

pub const ALLOWED_SHOTS: [usize; 4] = [0, 1, 3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Local,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub repo_root: PathBuf,
    pub embedder: EmbedderKind,
    pub embed_endpoint: Option<String>,
    pub embed_dims: usize,
    /// Name of the environment variable holding the embedding service token.
    pub embed_token_env: String,
    pub backend: BackendKind,
    pub model_id: String,
    pub llm_endpoint: Option<String>,
    /// Name of the environment variable holding the chat API key.
    pub api_key_env: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub requests_per_second: f64,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub send_attachments: bool,
    pub render_png: bool,
    pub shots: usize,
    pub mask: AblationMask,
    pub max_depth: usize,
    pub split_seed: u64,
    pub ratios: (f64, f64, f64),
    pub inner_line_budget: usize,
    pub filter: FilterConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            repo_root: PathBuf::from("solsum-repo"),
            embedder: EmbedderKind::Local,
            embed_endpoint: None,
            embed_dims: DEFAULT_DIMS,
            embed_token_env: "SOLSUM_EMBED_TOKEN".into(),
            backend: BackendKind::Mock,
            model_id: "mock".into(),
            llm_endpoint: None,
            api_key_env: "SOLSUM_API_KEY".into(),
            max_output_tokens: 128,
            temperature: 0.0,
            requests_per_second: 0.0,
            max_in_flight: 4,
            max_retries: 4,
            send_attachments: false,
            render_png: false,
            shots: 0,
            mask: AblationMask::ALL,
            max_depth: DEFAULT_MAX_DEPTH,
            split_seed: 42,
            ratios: DEFAULT_RATIOS,
            inner_line_budget: DEFAULT_INNER_LINE_BUDGET,
            filter: FilterConfig::default(),
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> PipelineError {
    PipelineError::Config(format!(
        "invalid value `{value}` for `{key}`: expected {expected}"
    ))
}

fn parse_num<T: std::str::FromStr>(
    key: &str,
    value: &str,
    expected: &str,
) -> Result<T, PipelineError> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, PipelineError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

impl PipelineConfig {
    /// Every key accepted by [`PipelineConfig::set`].
    pub const KEYS: [&'static str; 26] = [
        "repo",
        "embedder",
        "embed_endpoint",
        "embed_dims",
        "embed_token_env",
        "backend",
        "model_id",
        "llm_endpoint",
        "api_key_env",
        "max_output_tokens",
        "temperature",
        "requests_per_second",
        "max_in_flight",
        "max_retries",
        "send_attachments",
        "render_png",
        "shots",
        "mask",
        "max_depth",
        "seed",
        "ratios",
        "inner_line_budget",
        "filter_min_tokens",
        "filter_max_tokens",
        "filter_min_letter_ratio",
        "filter_min_code_tokens",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let value = value.trim();
        match key {
            "repo" | "repo_root" => self.repo_root = PathBuf::from(value),
            "embedder" => {
                self.embedder = match value {
                    "local" => EmbedderKind::Local,
                    "remote" => EmbedderKind::Remote,
                    _ => return Err(bad(key, value, "local or remote")),
                }
            }
            "embed_endpoint" => self.embed_endpoint = optional(value),
            "embed_dims" => self.embed_dims = parse_num(key, value, "a positive integer")?,
            "embed_token_env" => self.embed_token_env = value.to_string(),
            "backend" => {
                self.backend = match value {
                    "mock" => BackendKind::Mock,
                    "remote" => BackendKind::Remote,
                    _ => return Err(bad(key, value, "mock or remote")),
                }
            }
            "model_id" => self.model_id = value.to_string(),
            "llm_endpoint" => self.llm_endpoint = optional(value),
            "api_key_env" => self.api_key_env = value.to_string(),
            "max_output_tokens" => {
                self.max_output_tokens = parse_num(key, value, "a positive integer")?
            }
            "temperature" => self.temperature = parse_num(key, value, "a number")?,
            "requests_per_second" => self.requests_per_second = parse_num(key, value, "a number")?,
            "max_in_flight" => self.max_in_flight = parse_num(key, value, "a positive integer")?,
            "max_retries" => self.max_retries = parse_num(key, value, "an integer")?,
            "send_attachments" => self.send_attachments = parse_bool(key, value)?,
            "render_png" => self.render_png = parse_bool(key, value)?,
            "shots" => self.shots = parse_num(key, value, "one of 0, 1, 3, 5")?,
            "mask" => self.mask = AblationMask::parse(value).map_err(PipelineError::Config)?,
            "max_depth" => self.max_depth = parse_num(key, value, "a positive integer")?,
            "seed" | "split_seed" => self.split_seed = parse_num(key, value, "an integer")?,
            "ratios" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(key, value, "three comma-separated numbers"))?;
                let [a, b, c] = parts[..] else {
                    return Err(bad(key, value, "three comma-separated numbers"));
                };
                self.ratios = (a, b, c);
            }
            "inner_line_budget" => {
                self.inner_line_budget = parse_num(key, value, "a positive integer")?
            }
            "filter_min_tokens" => {
                self.filter.min_comment_tokens = parse_num(key, value, "an integer")?
            }
            "filter_max_tokens" => {
                self.filter.max_comment_tokens = parse_num(key, value, "an integer")?
            }
            "filter_min_letter_ratio" => {
                self.filter.min_letter_ratio = parse_num(key, value, "a number")?
            }
            "filter_min_code_tokens" => {
                self.filter.min_code_tokens = parse_num(key, value, "an integer")?
            }
            _ => return Err(PipelineError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), PipelineError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Config(format!(
                    "{origin}:{}: expected `key = value`",
                    n + 1
                )));
            };
            self.set(key.trim(), value)
                .map_err(|e| PipelineError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `SOLSUM_<KEY>` variables from `vars`.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), PipelineError> {
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let key = k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
                Self::KEYS.contains(&key.as_str()).then_some((key, v))
            })
            .collect();
        pairs.sort();
        for (key, value) in pairs {
            self.set(&key, &value).map_err(|e| {
                PipelineError::Config(format!("{ENV_PREFIX}{}: {e}", key.to_uppercase()))
            })?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, PipelineError> {
        let mut config = PipelineConfig::default();
        if let Some(path) = file {
            config.apply_file(path)?;
        }
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !ALLOWED_SHOTS.contains(&self.shots) {
            return Err(PipelineError::Config(format!(
                "shots must be one of 0, 1, 3, 5 (got {})",
                self.shots
            )));
        }
        if self.max_depth == 0 {
            return Err(PipelineError::Config("max_depth must be at least 1".into()));
        }
        if self.embed_dims == 0 {
            return Err(PipelineError::Config(
                "embed_dims must be at least 1".into(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(PipelineError::Config(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if self.embedder == EmbedderKind::Remote && self.embed_endpoint.is_none() {
            return Err(PipelineError::Config(
                "embedder = remote requires embed_endpoint".into(),
            ));
        }
        if self.backend == BackendKind::Remote && self.llm_endpoint.is_none() {
            return Err(PipelineError::Config(
                "backend = remote requires llm_endpoint".into(),
            ));
        }
        Ok(())
    }

    /// Config as recorded in run manifests: everything except the
    /// repository location, so identical runs in different places agree.
    pub fn portable_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("repo_root");
        }
        value
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.portable_json()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
