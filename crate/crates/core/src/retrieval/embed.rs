use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingVector, RetrievalError};
use crate::http::{self, RetryPolicy};

type BatchResult = Result<Vec<EmbeddingVector>, RetrievalError>;

pub const DEFAULT_DIMS: usize = 384;

pub trait EmbeddingProvider: Send + Sync {
    /// Names the embedder and its configuration; vectors from different ids
    /// are never compared.
    fn id(&self) -> String;

    fn dims(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out
            .pop()
            .unwrap_or_else(|| EmbeddingVector::zeros(self.dims())))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError>;
}

/// Offline bag-of-tokens embedder: lowercase tokens split on
/// non-alphanumerics, term counts hashed into `dims` signed buckets, then
/// L2-normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalHashingEmbedder {
    pub dims: usize,
}

impl Default for LocalHashingEmbedder {
    fn default() -> Self {
        LocalHashingEmbedder { dims: DEFAULT_DIMS }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

impl LocalHashingEmbedder {
    pub fn new(dims: usize) -> Self {
        LocalHashingEmbedder { dims: dims.max(1) }
    }

    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dims];
        for token in Self::tokens(text) {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dims as u64) as usize;
            v[bucket] += if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
        }
        EmbeddingVector(v).normalized()
    }
}

impl EmbeddingProvider for LocalHashingEmbedder {
    fn id(&self) -> String {
        format!("local-hash-v1:{}", self.dims)
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    pub token: Option<String>,
    pub dims: usize,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl RemoteEmbedderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteEmbedderConfig {
            endpoint: endpoint.into(),
            token: None,
            dims: DEFAULT_DIMS,
            batch_size: 32,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP service answering `{"texts": [..]}` with
/// `{"vectors": [[..]]}`.
pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let agent = http::agent(config.timeout);
        RemoteEmbedder { config, agent }
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let reply: EmbedResponse = http::post_json(
            &self.agent,
            &self.config.endpoint,
            self.config.token.as_deref(),
            &EmbedRequest { texts },
            &self.config.retry,
        )?;
        if reply.vectors.len() != texts.len() {
            return Err(RetrievalError::ProviderShape {
                expected: texts.len(),
                got: reply.vectors.len(),
            });
        }
        reply
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.config.dims {
                    return Err(RetrievalError::DimensionMismatch {
                        left: self.config.dims,
                        right: v.len(),
                    });
                }
                Ok(EmbeddingVector(v).normalized())
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.config.endpoint, self.config.dims)
    }

    fn dims(&self) -> usize {
        self.config.dims
    }

    /// Blank texts map to the zero vector without a request. The rest are
    /// sent in batches by up to `max_in_flight` concurrent workers.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let pending: Vec<usize> = (0..texts.len())
            .filter(|&i| !texts[i].trim().is_empty())
            .collect();
        let batches: Vec<&[usize]> = pending.chunks(self.config.batch_size.max(1)).collect();
        let results: Mutex<Vec<Option<BatchResult>>> =
            Mutex::new((0..batches.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.clamp(1, batches.len().max(1));

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let b = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(b) else { break };
                    let batch_texts: Vec<&str> = batch.iter().map(|&i| texts[i]).collect();
                    let outcome = self.request(&batch_texts);
                    let failed = outcome.is_err();
                    results.lock().expect("embedding worker panicked")[b] = Some(outcome);
                    if failed {
                        next.store(batches.len(), Ordering::SeqCst);
                    }
                });
            }
        });

        let mut out = vec![EmbeddingVector::zeros(self.config.dims); texts.len()];
        let results = results.into_inner().expect("embedding worker panicked");
        // After a failure, later batches are never started; the failed
        // batch's error is returned below.
        for (batch, outcome) in batches.iter().zip(results) {
            let Some(outcome) = outcome else { continue };
            for (&i, v) in batch.iter().zip(outcome?) {
                out[i] = v;
            }
        }
        Ok(out)
    }
}
