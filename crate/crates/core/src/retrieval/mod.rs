//! Embedding, cosine ranking and the triplet objective used to compare
//! code snippets.

mod cache;
mod embed;

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::HttpError;

pub use cache::{load_index_cache, save_index_cache, uuid_fingerprint};
pub use embed::{
    EmbeddingProvider, LocalHashingEmbedder, RemoteEmbedder, RemoteEmbedderConfig, DEFAULT_DIMS,
};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("retrieval index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding provider failed: {0}")]
    Provider(#[from] HttpError),
    #[error("embedding provider returned {got} vectors for {expected} texts")]
    ProviderShape { expected: usize, got: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl RetrievalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dims: usize) -> Self {
        EmbeddingVector(vec![0.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|x| *x /= n);
        }
        self
    }
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(), RetrievalError> {
    if a.dims() != b.dims() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Cosine of the angle between `a` and `b`; 0.0 when either is the zero vector.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    check_dims(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Which way round the similarity difference is taken in [`triplet_loss`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletForm {
    /// `max(0, cos(a,p) - cos(a,n) + margin)`.
    AsWritten,
    /// `max(0, cos(a,n) - cos(a,p) + margin)`: zero once the positive is
    /// closer than the negative by at least the margin.
    #[default]
    Conventional,
}

pub fn triplet_loss(
    anchor: &EmbeddingVector,
    positive: &EmbeddingVector,
    negative: &EmbeddingVector,
    margin: f64,
    form: TripletForm,
) -> Result<f64, RetrievalError> {
    let pos = cosine_similarity(anchor, positive)?;
    let neg = cosine_similarity(anchor, negative)?;
    let diff = match form {
        TripletForm::AsWritten => pos - neg,
        TripletForm::Conventional => neg - pos,
    };
    Ok((diff + margin).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub provider_id: String,
    pub dims: usize,
    pub entries: Vec<(String, EmbeddingVector)>,
}

impl RetrievalIndex {
    pub fn new(provider_id: impl Into<String>, dims: usize) -> Self {
        RetrievalIndex {
            provider_id: provider_id.into(),
            dims,
            entries: Vec::new(),
        }
    }

    /// Embeds every `(uuid, text)` item with `provider`. Entries keep input order.
    pub fn build(
        provider: &dyn EmbeddingProvider,
        items: &[(String, String)],
    ) -> Result<Self, RetrievalError> {
        let texts: Vec<&str> = items.iter().map(|(_, t)| t.as_str()).collect();
        let vectors = provider.embed_batch(&texts)?;
        let mut index = RetrievalIndex::new(provider.id(), provider.dims());
        for ((uuid, _), v) in items.iter().zip(vectors) {
            index.push(uuid.clone(), v)?;
        }
        Ok(index)
    }

    pub fn push(&mut self, uuid: String, vector: EmbeddingVector) -> Result<(), RetrievalError> {
        if vector.dims() != self.dims {
            return Err(RetrievalError::DimensionMismatch {
                left: self.dims,
                right: vector.dims(),
            });
        }
        self.entries.push((uuid, vector));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, uuid: &str) -> Option<&EmbeddingVector> {
        self.entries.iter().find(|(u, _)| u == uuid).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub uuid: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub query_id: String,
    pub matches: Vec<Match>,
}

fn rank(a: &Match, b: &Match) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.uuid.cmp(&b.uuid))
}

/// The `k` entries most similar to `query`, best first, ties by uuid.
pub fn top_k_matches(
    index: &RetrievalIndex,
    query_id: &str,
    query: &EmbeddingVector,
    k: usize,
) -> Result<MatchResult, RetrievalError> {
    top_k_excluding(index, query_id, query, k, &[])
}

/// Like [`top_k_matches`], skipping entries whose uuid is in `exclude`.
pub fn top_k_excluding(
    index: &RetrievalIndex,
    query_id: &str,
    query: &EmbeddingVector,
    k: usize,
    exclude: &[&str],
) -> Result<MatchResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut scored = index
        .entries
        .iter()
        .filter(|(uuid, _)| !exclude.contains(&uuid.as_str()))
        .map(|(uuid, v)| {
            Ok(Match {
                uuid: uuid.clone(),
                similarity: cosine_similarity(query, v)?,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank);
        scored.truncate(k);
    }
    scored.sort_by(rank);
    Ok(MatchResult {
        query_id: query_id.to_string(),
        matches: scored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMatch {
    pub uuid: String,
    pub similarity: f64,
    pub code: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedResults {
    pub query_id: String,
    pub matches: Vec<ResolvedMatch>,
}

impl SavedResults {
    pub fn to_match_result(&self) -> MatchResult {
        MatchResult {
            query_id: self.query_id.clone(),
            matches: self
                .matches
                .iter()
                .map(|m| Match {
                    uuid: m.uuid.clone(),
                    similarity: m.similarity,
                })
                .collect(),
        }
    }
}

/// Attaches each match's code and comment from `lookup`. Matches the lookup
/// cannot resolve get empty strings.
pub fn resolve_matches(
    result: &MatchResult,
    lookup: impl Fn(&str) -> Option<(String, String)>,
) -> SavedResults {
    SavedResults {
        query_id: result.query_id.clone(),
        matches: result
            .matches
            .iter()
            .map(|m| {
                let (code, comment) = lookup(&m.uuid).unwrap_or_default();
                ResolvedMatch {
                    uuid: m.uuid.clone(),
                    similarity: m.similarity,
                    code,
                    comment,
                }
            })
            .collect(),
    }
}

/// Writes `result` as JSON with code and comment resolved by `lookup`.
pub fn save_results_json(
    result: &MatchResult,
    lookup: impl Fn(&str) -> Option<(String, String)>,
    path: &Path,
) -> Result<SavedResults, RetrievalError> {
    let saved = resolve_matches(result, lookup);
    let text = serde_json::to_string_pretty(&saved).map_err(|source| RetrievalError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| RetrievalError::io(path, e))?;
    Ok(saved)
}

pub fn load_results_json(path: &Path) -> Result<SavedResults, RetrievalError> {
    let text = std::fs::read_to_string(path).map_err(|e| RetrievalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| RetrievalError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector(xs.to_vec())
    }

    #[test]
    fn cosine_cases() {
        let c = cosine_similarity(&v(&[1.0, 1.0, 0.0]), &v(&[1.0, 0.0, 0.0])).unwrap();
        assert!((c - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            0.0
        );
        assert_eq!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let x = v(&[0.3, -2.0, 5.0]);
        assert!((cosine_similarity(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(RetrievalError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn triplet_forms() {
        let a = v(&[1.0, 0.0]);
        let n = v(&[0.0, 1.0]);
        assert_eq!(
            triplet_loss(&a, &a, &n, 0.2, TripletForm::Conventional).unwrap(),
            0.0
        );
        assert!(
            (triplet_loss(&a, &a, &n, 0.2, TripletForm::AsWritten).unwrap() - 1.2).abs() < 1e-12
        );
        for form in [TripletForm::AsWritten, TripletForm::Conventional] {
            assert!((triplet_loss(&a, &a, &a, 0.2, form).unwrap() - 0.2).abs() < 1e-12);
        }
        assert_eq!(TripletForm::default(), TripletForm::Conventional);
    }

    #[test]
    fn top_k_basics() {
        let mut index = RetrievalIndex::new("t", 2);
        index.push("b".into(), v(&[1.0, 0.0])).unwrap();
        index.push("a".into(), v(&[1.0, 0.0])).unwrap();
        index.push("c".into(), v(&[0.0, 1.0])).unwrap();
        let r = top_k_matches(&index, "q", &v(&[1.0, 0.0]), 2).unwrap();
        let ids: Vec<_> = r.matches.iter().map(|m| m.uuid.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(r.matches[0].similarity, 1.0);
        assert_eq!(
            top_k_matches(&index, "q", &v(&[1.0, 0.0]), 10)
                .unwrap()
                .matches
                .len(),
            3
        );
        let ex = top_k_excluding(&index, "q", &v(&[1.0, 0.0]), 1, &["a"]).unwrap();
        assert_eq!(ex.matches[0].uuid, "b");
        assert!(matches!(
            top_k_matches(&index, "q", &v(&[1.0, 0.0]), 0),
            Err(RetrievalError::InvalidK)
        ));
        let empty = RetrievalIndex::new("t", 2);
        assert!(matches!(
            top_k_matches(&empty, "q", &v(&[1.0, 0.0]), 1),
            Err(RetrievalError::EmptyIndex)
        ));
    }
}
