//! Blocking JSON-over-HTTP with bounded retries, shared by the remote
//! embedding and chat clients.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff for the given 0-based retry number.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(16)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

pub fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

fn retry_after(resp: &ureq::http::Response<ureq::Body>) -> Option<Duration> {
    let value = resp.headers().get("retry-after")?.to_str().ok()?;
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|s| *s >= 0.0)
        .map(Duration::from_secs_f64)
}

/// POSTs `body` as JSON and decodes the JSON reply.
///
/// Transport failures and 5xx replies are retried with exponential backoff;
/// 429 replies wait for `Retry-After` when present. Other statuses fail at once.
pub fn post_json<B: Serialize, R: DeserializeOwned>(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &B,
    policy: &RetryPolicy,
) -> Result<R, HttpError> {
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        let mut request = agent.post(url);
        if let Some(token) = bearer {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let last = attempt > policy.max_retries;
        let wait = match request.send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if (200..300).contains(&status) {
                    log::debug!("POST {url} succeeded on attempt {attempt}");
                    return resp
                        .body_mut()
                        .read_json::<R>()
                        .map_err(|e| HttpError::Malformed(e.to_string()));
                }
                if status == 429 {
                    if last {
                        return Err(HttpError::RateLimited { attempts: attempt });
                    }
                    retry_after(&resp).unwrap_or_else(|| policy.delay(attempt - 1))
                } else if status >= 500 && !last {
                    policy.delay(attempt - 1)
                } else {
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    return Err(HttpError::Status { status, body: text });
                }
            }
            Err(e) => {
                if last {
                    return Err(HttpError::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    });
                }
                policy.delay(attempt - 1)
            }
        };
        log::warn!("POST {url} attempt {attempt} failed; retrying in {wait:?}");
        thread::sleep(wait);
    }
}
