//! Summary evaluation metrics on a 0–100 scale.

mod meteor;

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use meteor::{meteor, meteor_with, MeteorParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no pairs to evaluate")]
    EmptyInput,
}

/// Lowercases, splits on whitespace, then splits each piece into runs of
/// letters, digits and underscores, with every other character on its own.
pub fn tokenize_for_metrics(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in text.to_lowercase().split_whitespace() {
        let mut word = String::new();
        for c in piece.chars() {
            if c.is_alphanumeric() || c == '_' {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with n = 1..4, uniform weights and brevity penalty.
///
/// A zero clipped match count for n ≥ 2 is replaced by `1 / (total + 1)`;
/// no unigram overlap scores 0.
pub fn bleu4<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let total = candidate.len().saturating_sub(n - 1);
        let matched: usize = cand
            .iter()
            .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += 0.25 * p.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (100.0 * bp * log_sum.exp()).clamp(0.0, 100.0)
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

/// LCS-based F-measure with recall weighted by β = 1.2.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / candidate.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (100.0 * (1.0 + b2) * p * r / (r + b2 * p)).clamp(0.0, 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub uuid: String,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    /// Filled only when merged from an external scorer.
    pub bleurt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub bleurt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub corpus: CorpusScore,
    pub per_sample: Vec<SampleScore>,
}

pub fn score_pair(uuid: &str, candidate: &str, reference: &str) -> SampleScore {
    let c = tokenize_for_metrics(candidate);
    let r = tokenize_for_metrics(reference);
    SampleScore {
        uuid: uuid.to_string(),
        bleu4: bleu4(&c, &r),
        meteor: meteor(&c, &r),
        rouge_l: rouge_l(&c, &r),
        bleurt: None,
    }
}

/// Scores every `(uuid, candidate, reference)` and averages per sample.
pub fn evaluate_corpus(pairs: &[(String, String, String)]) -> Result<MetricReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut per_sample: Vec<SampleScore> = pairs
        .par_iter()
        .map(|(u, c, r)| score_pair(u, c, r))
        .collect();
    per_sample.sort_by(|a, b| a.uuid.cmp(&b.uuid));
    let n = per_sample.len() as f64;
    let mean = |f: fn(&SampleScore) -> f64| per_sample.iter().map(f).sum::<f64>() / n;
    let corpus = CorpusScore {
        bleu4: mean(|s| s.bleu4),
        meteor: mean(|s| s.meteor),
        rouge_l: mean(|s| s.rouge_l),
        bleurt: None,
    };
    Ok(MetricReport {
        n: per_sample.len(),
        corpus,
        per_sample,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl MetricReport {
    /// Aligned plain-text table: one row per sample, then the mean.
    pub fn to_table(&self) -> String {
        let width = self
            .per_sample
            .iter()
            .map(|s| s.uuid.len())
            .max()
            .unwrap_or(0)
            .max("mean".len())
            .max("uuid".len());
        let mut out = format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "uuid", "BLEU-4", "METEOR", "ROUGE-L", "BLEURT"
        );
        for s in &self.per_sample {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8}",
                s.uuid,
                s.bleu4,
                s.meteor,
                s.rouge_l,
                fmt_opt(s.bleurt)
            );
        }
        let c = &self.corpus;
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8}",
            "mean",
            c.bleu4,
            c.meteor,
            c.rouge_l,
            fmt_opt(c.bleurt)
        );
        let _ = writeln!(out, "n = {}", self.n);
        out
    }
}
