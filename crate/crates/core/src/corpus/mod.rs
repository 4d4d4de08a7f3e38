//! Persistent store of method–comment samples.
//!
//! Layout under the repository root:
//!
//! ```text
//! samples/<uuid>.json   one CodeSample per file
//! index.json            uuid → {path, contract, function, content_hash}
//! splits.json           {train, validation, test} → uuid lists
//! ```

mod filter;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::callgraph::{build_reference_tree, to_dot, CallGraphError, DEFAULT_MAX_DEPTH};
use crate::parser::{extract_method_comment_pairs, parse_source, ParseError};
use crate::retrieval::EmbeddingVector;
use crate::semfacts::{collect_facts, SemanticFacts};

pub use filter::{filter_low_quality, is_tag_skeleton, strip_tags, FilterConfig};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{}:{}: {}", source.line, source.column, source.message)]
    Parse { path: String, source: ParseError },
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
    #[error("invalid split ratios {0:?}: each must be nonnegative and they must sum to 1")]
    InvalidRatio((f64, f64, f64)),
    #[error("unknown sample {0}")]
    UnknownSample(String),
    #[error("{path}: {source}")]
    Facts {
        path: String,
        source: CallGraphError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSample {
    pub uuid: String,
    pub source_path: String,
    pub contract: String,
    pub function: String,
    pub code: String,
    /// Reference summary: the doc comment with NatSpec tag markers removed.
    pub comment: String,
    pub facts: SemanticFacts,
    pub dot: String,
    pub embedding: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub path: String,
    pub contract: String,
    pub function: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Train / validation / test proportions of the reference dataset
/// (11032 : 2758 : 1000 pairs).
pub const DEFAULT_RATIOS: (f64, f64, f64) = (11032.0 / 14790.0, 2758.0 / 14790.0, 1000.0 / 14790.0);

/// SHA-256 over the fields identifying a sample, hex encoded.
pub fn content_hash(
    source_path: &str,
    contract: &str,
    function: &str,
    code: &str,
    comment: &str,
) -> String {
    let mut hasher = Sha256::new();
    for part in [source_path, contract, function, code, comment] {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

/// A version-4 formatted UUID whose random bits come from the content hash,
/// so re-ingesting the same sample reproduces the same identifier.
pub fn uuid_from_hash(hash_hex: &str) -> String {
    let bytes = hex::decode(hash_hex).expect("content hash is hex");
    let mut random = [0u8; 16];
    random.copy_from_slice(&bytes[..16]);
    uuid::Builder::from_random_bytes(random)
        .into_uuid()
        .hyphenated()
        .to_string()
}

/// Parses one file and turns every documented, implemented function whose
/// comment passes `filter` into a sample. Pure; touches no repository state.
pub fn prepare_samples(
    text: &str,
    source_path: &str,
    filter: &FilterConfig,
    max_depth: usize,
) -> Result<Vec<CodeSample>, CorpusError> {
    let unit = parse_source(text, source_path).map_err(|source| CorpusError::Parse {
        path: source_path.to_string(),
        source,
    })?;
    let reference = build_reference_tree(&unit);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (contract, function, raw) in extract_method_comment_pairs(&unit) {
        if !function.has_body || !filter.accepts(&raw, &function.body_text) {
            continue;
        }
        let name = function.display_name();
        let comment = strip_tags(&raw);
        let hash = content_hash(
            source_path,
            &contract.name,
            name,
            &function.body_text,
            &comment,
        );
        let uuid = uuid_from_hash(&hash);
        if !seen.insert(uuid.clone()) {
            continue;
        }
        let facts = collect_facts(&unit, &reference, &contract.name, name, max_depth).map_err(
            |source| CorpusError::Facts {
                path: source_path.to_string(),
                source,
            },
        )?;
        out.push(CodeSample {
            uuid,
            source_path: source_path.to_string(),
            contract: contract.name.clone(),
            function: name.to_string(),
            code: function.body_text.clone(),
            comment,
            dot: to_dot(&facts.call_tree),
            facts,
            embedding: None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: usize,
    /// `(source_path, samples yielded)` per successfully parsed file.
    pub per_file: Vec<(String, usize)>,
    pub added: usize,
    pub unchanged: usize,
    /// `(path, message)` for files that could not be ingested.
    pub failures: Vec<(String, String)>,
}

#[derive(Debug)]
pub struct Repository {
    root: PathBuf,
    index: BTreeMap<String, IndexEntry>,
    splits: Option<Splits>,
    pub filter: FilterConfig,
    pub max_depth: usize,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, CorpusError> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|source| CorpusError::Json {
                path: path.to_path_buf(),
                source,
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Pretty JSON with a trailing newline, written through a temporary file so
/// readers never observe a partial write.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CorpusError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text + "\n").map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

impl Repository {
    /// Opens the repository at `root`, creating it if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let root = root.into();
        let samples = root.join("samples");
        std::fs::create_dir_all(&samples).map_err(io_err(&samples))?;
        let index = read_json(&root.join("index.json"))?.unwrap_or_default();
        let splits = read_json(&root.join("splits.json"))?;
        Ok(Repository {
            root,
            index,
            splits,
            filter: FilterConfig::default(),
            max_depth: DEFAULT_MAX_DEPTH,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> &BTreeMap<String, IndexEntry> {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn splits(&self) -> Option<&Splits> {
        self.splits.as_ref()
    }

    pub fn sample_path(&self, uuid: &str) -> PathBuf {
        self.root.join("samples").join(format!("{uuid}.json"))
    }

    pub fn load_sample(&self, uuid: &str) -> Result<CodeSample, CorpusError> {
        if !self.index.contains_key(uuid) {
            return Err(CorpusError::UnknownSample(uuid.to_string()));
        }
        let path = self.sample_path(uuid);
        read_json(&path)?.ok_or_else(|| CorpusError::UnknownSample(uuid.to_string()))
    }

    /// Loads samples in parallel, preserving the order of `uuids`.
    pub fn load_samples(&self, uuids: &[String]) -> Result<Vec<CodeSample>, CorpusError> {
        uuids.par_iter().map(|u| self.load_sample(u)).collect()
    }

    /// Ingests `path`, recording samples under its file name.
    pub fn ingest_file(&mut self, path: &Path) -> Result<Vec<String>, CorpusError> {
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.ingest_file_as(path, &name)
    }

    /// Ingests `path`, recording `source_path` as its location. Returns the
    /// uuids of every sample the file yields, including ones already stored.
    pub fn ingest_file_as(
        &mut self,
        path: &Path,
        source_path: &str,
    ) -> Result<Vec<String>, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let samples = prepare_samples(&text, source_path, &self.filter, self.max_depth)?;
        let uuids = samples.iter().map(|s| s.uuid.clone()).collect();
        self.commit(samples)?;
        self.save_index()?;
        Ok(uuids)
    }

    /// Ingests many `(file, source_path)` pairs. Files are parsed in parallel;
    /// writes go through this single owner. Unparsable files are reported and
    /// skipped; an unreadable file fails the whole call before anything is
    /// written.
    pub fn ingest_many(
        &mut self,
        files: &[(PathBuf, String)],
    ) -> Result<IngestReport, CorpusError> {
        let (filter, max_depth) = (&self.filter, self.max_depth);
        let prepared: Vec<_> = files
            .par_iter()
            .map(|(path, source_path)| {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                prepare_samples(&text, source_path, filter, max_depth)
            })
            .collect();

        let prepared: Vec<_> = prepared
            .into_iter()
            .map(|outcome| match outcome {
                Err(e @ CorpusError::Io { .. }) => Err(e),
                other => Ok(other),
            })
            .collect::<Result<_, _>>()?;

        let mut report = IngestReport {
            files: files.len(),
            ..IngestReport::default()
        };
        for ((path, source_path), outcome) in files.iter().zip(prepared) {
            match outcome {
                Ok(samples) => {
                    report.per_file.push((source_path.clone(), samples.len()));
                    let (added, unchanged) = self.commit(samples)?;
                    report.added += added;
                    report.unchanged += unchanged;
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    report
                        .failures
                        .push((path.display().to_string(), e.to_string()));
                }
            }
        }
        self.save_index()?;
        Ok(report)
    }

    fn commit(&mut self, samples: Vec<CodeSample>) -> Result<(usize, usize), CorpusError> {
        let (mut added, mut unchanged) = (0, 0);
        for sample in samples {
            if self.index.contains_key(&sample.uuid) && self.sample_path(&sample.uuid).is_file() {
                unchanged += 1;
                continue;
            }
            write_json(&self.sample_path(&sample.uuid), &sample)?;
            let hash = content_hash(
                &sample.source_path,
                &sample.contract,
                &sample.function,
                &sample.code,
                &sample.comment,
            );
            self.index.insert(
                sample.uuid,
                IndexEntry {
                    path: sample.source_path,
                    contract: sample.contract,
                    function: sample.function,
                    content_hash: hash,
                },
            );
            added += 1;
        }
        Ok((added, unchanged))
    }

    fn save_index(&self) -> Result<(), CorpusError> {
        write_json(&self.root.join("index.json"), &self.index)
    }

    /// Stores embeddings in the sample files.
    pub fn set_embeddings(&self, vectors: &[(String, EmbeddingVector)]) -> Result<(), CorpusError> {
        vectors.par_iter().try_for_each(|(uuid, v)| {
            let mut sample = self.load_sample(uuid)?;
            if sample.embedding.as_ref() != Some(v) {
                sample.embedding = Some(v.clone());
                write_json(&self.sample_path(uuid), &sample)?;
            }
            Ok(())
        })
    }

    /// Shuffles all uuids with `seed` and partitions them by `ratios`,
    /// persisting the result to `splits.json`.
    pub fn split_dataset(
        &mut self,
        ratios: (f64, f64, f64),
        seed: u64,
    ) -> Result<Splits, CorpusError> {
        let uuids: Vec<String> = self.index.keys().cloned().collect();
        let splits = partition(uuids, ratios, seed)?;
        write_json(&self.root.join("splits.json"), &splits)?;
        self.splits = Some(splits.clone());
        Ok(splits)
    }
}

/// Deterministic shuffle-and-cut of `uuids` (sorted first, so the input
/// order never matters).
pub fn partition(
    mut uuids: Vec<String>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Splits, CorpusError> {
    let (rt, rv, rs) = ratios;
    let valid = [rt, rv, rs].iter().all(|r| r.is_finite() && *r >= 0.0)
        && ((rt + rv + rs) - 1.0).abs() <= 1e-9;
    if !valid {
        return Err(CorpusError::InvalidRatio(ratios));
    }
    uuids.sort();
    uuids.dedup();
    uuids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = uuids.len();
    let train = ((n as f64 * rt).round() as usize).min(n);
    let validation = ((n as f64 * rv).round() as usize).min(n - train);
    let test = uuids.split_off(train + validation);
    let validation = uuids.split_off(train);
    Ok(Splits {
        train: uuids,
        validation,
        test,
    })
}
