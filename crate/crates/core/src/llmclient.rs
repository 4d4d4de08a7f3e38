//! Summary-generating backends: an OpenAI-style chat client and an offline
//! mock whose output depends only on the prompt's structure.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::http::{self, HttpError, RetryPolicy};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cannot read attachment {path}: {source}")]
    Attachment {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<HttpError> for LlmError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Transport { attempts, message } => LlmError::Transport { attempts, message },
            HttpError::RateLimited { attempts } => LlmError::RateLimited { attempts },
            HttpError::Status { status, body } => LlmError::Status { status, body },
            HttpError::Malformed(m) => LlmError::MalformedResponse(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt_text: String,
    pub attachment: Option<PathBuf>,
    pub model_id: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl LlmRequest {
    pub fn new(prompt_text: impl Into<String>, model_id: impl Into<String>) -> Self {
        LlmRequest {
            prompt_text: prompt_text.into(),
            attachment: None,
            model_id: model_id.into(),
            max_output_tokens: 128,
            temperature: 0.0,
        }
    }

    fn validate(&self) -> Result<(), LlmError> {
        if self.prompt_text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("prompt_text is empty".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} is negative",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub summary: String,
    pub model_id: String,
    pub latency_ms: u64,
    /// `(prompt, completion)` tokens when the backend reports them.
    pub token_usage: Option<(u64, u64)>,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

/// Validates `req` and asks `backend` for one completion.
pub fn summarize(backend: &dyn Backend, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
    req.validate()?;
    let mut resp = backend.complete(req)?;
    resp.summary = resp.summary.trim().to_string();
    Ok(resp)
}

/// Deterministic offline backend. See [`mock_summary`].
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        Ok(LlmResponse {
            summary: mock_summary(&req.prompt_text),
            model_id: req.model_id.clone(),
            latency_ms: 0,
            token_usage: None,
        })
    }
}

/// Splits a rendered prompt into `(tag, body)` pairs on `[TAG]` lines.
fn prompt_sections(prompt: &str) -> Vec<(&str, Vec<&str>)> {
    let mut out: Vec<(&str, Vec<&str>)> = Vec::new();
    for line in prompt.lines() {
        let tag = line
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .filter(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_uppercase() || c == '_'));
        match (tag, out.last_mut()) {
            (Some(t), _) => out.push((t, Vec::new())),
            (None, Some((_, body))) => body.push(line),
            (None, None) => {}
        }
    }
    out
}

fn target_name(code: &[&str]) -> String {
    let words: Vec<&str> = code
        .iter()
        .flat_map(|l| l.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$')))
        .filter(|w| !w.is_empty())
        .collect();
    if let Some(i) = words.iter().position(|w| *w == "function") {
        if let Some(name) = words.get(i + 1) {
            return name.to_string();
        }
    }
    ["constructor", "fallback", "receive"]
        .into_iter()
        .find(|k| words.contains(k))
        .unwrap_or("function")
        .to_string()
}

/// `"<name>: calls a, b; params x, y."`, naming the target's direct callees
/// from the call-graph section and its parameters from the identifier
/// section. Absent parts are left out; with neither it is `"<name>."`.
pub fn mock_summary(prompt: &str) -> String {
    let sections = prompt_sections(prompt);
    let body = |tag: &str| {
        sections
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, b)| b.as_slice())
            .unwrap_or(&[])
    };

    let name = target_name(body("TARGET"));

    let mut calls: Vec<&str> = Vec::new();
    for line in body("CALL_GRAPH") {
        if line.starts_with(char::is_whitespace) || line.starts_with("cycle:") {
            continue;
        }
        let Some((_, rest)) = line.split_once(" -> ") else {
            continue;
        };
        let callee = rest.split_whitespace().next().unwrap_or_default();
        if !callee.is_empty() && !calls.contains(&callee) {
            calls.push(callee);
        }
    }

    let params: Vec<&str> = body("IDENTIFIERS")
        .iter()
        .filter_map(|l| l.strip_prefix("- "))
        .filter_map(|l| l.split_once(" (parameter").map(|(n, _)| n))
        .collect();

    let mut parts = Vec::new();
    if !calls.is_empty() {
        parts.push(format!("calls {}", calls.join(", ")));
    }
    if !params.is_empty() {
        parts.push(format!("params {}", params.join(", ")));
    }
    if parts.is_empty() {
        format!("{name}.")
    } else {
        format!("{name}: {}.", parts.join("; "))
    }
}

/// Token bucket shared by concurrent callers: `rate` permits per second,
/// at most `capacity` stored.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate: f64, capacity: u32) -> Self {
        let capacity = f64::from(capacity.max(1));
        TokenBucket {
            rate,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a permit is available. A non-positive rate never blocks.
    pub fn acquire(&self) {
        if self.rate <= 0.0 {
            return;
        }
        loop {
            let wait = {
                let mut state = self.state.lock().expect("token bucket poisoned");
                let now = Instant::now();
                let (tokens, last) = *state;
                let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.rate)
                    .min(self.capacity);
                if tokens >= 1.0 {
                    *state = (tokens - 1.0, now);
                    return;
                }
                *state = (tokens, now);
                Duration::from_secs_f64((1.0 - tokens) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteChatConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    pub timeout: Duration,
    /// Requests per second; 0 disables rate limiting.
    pub requests_per_second: f64,
    pub burst: u32,
    /// Sends the attachment as an inline base64 PNG image part.
    pub send_attachments: bool,
}

impl RemoteChatConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteChatConfig {
            endpoint: endpoint.into(),
            api_key: None,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
            requests_per_second: 0.0,
            burst: 1,
            send_attachments: false,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub struct RemoteChatBackend {
    config: RemoteChatConfig,
    agent: ureq::Agent,
    bucket: TokenBucket,
}

impl RemoteChatBackend {
    pub fn new(config: RemoteChatConfig) -> Self {
        let agent = http::agent(config.timeout);
        let bucket = TokenBucket::new(config.requests_per_second, config.burst);
        RemoteChatBackend {
            config,
            agent,
            bucket,
        }
    }

    fn body(&self, req: &LlmRequest) -> Result<Value, LlmError> {
        let content = match (&req.attachment, self.config.send_attachments) {
            (Some(path), true) => {
                let bytes = std::fs::read(path).map_err(|source| LlmError::Attachment {
                    path: path.clone(),
                    source,
                })?;
                let data = base64::engine::general_purpose::STANDARD.encode(bytes);
                json!([
                    {"type": "text", "text": req.prompt_text},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{data}")}}
                ])
            }
            _ => Value::String(req.prompt_text.clone()),
        };
        Ok(json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": req.max_output_tokens,
            "temperature": req.temperature,
        }))
    }
}

impl Backend for RemoteChatBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let body = self.body(req)?;
        self.bucket.acquire();
        let started = Instant::now();
        let reply: ChatResponse = http::post_json(
            &self.agent,
            &self.config.endpoint,
            self.config.api_key.as_deref(),
            &body,
            &self.config.retry,
        )?;
        let summary = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?;
        Ok(LlmResponse {
            summary,
            model_id: req.model_id.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            token_usage: reply.usage.map(|u| (u.prompt_tokens, u.completion_tokens)),
        })
    }
}
