//! The batch pipeline behind the command-line tool: ingest, split, index,
//! summarize, evaluate and ablate over one repository.
//!
//! Runs live under `<repo>/runs/<run_id>/`:
//!
//! ```text
//! manifest.json          config, config hash, targets, creation time
//! outputs/<uuid>.json    {uuid, contract, function, prompt, token_count, summary}
//! graphs/<uuid>.png      call graph images, when rendering is enabled
//! report.json/.txt       metric report written by evaluate
//! ```

mod config;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::callgraph::{build_reference_tree, graft_call_tree, render_png, to_dot, CallGraphError};
use crate::corpus::{write_json, CodeSample, CorpusError, IngestReport, Repository, Splits};
use crate::http::RetryPolicy;
use crate::llmclient::{
    summarize, Backend, LlmError, LlmRequest, MockBackend, RemoteChatBackend, RemoteChatConfig,
};
use crate::metrics::{evaluate_corpus, MetricReport, MetricsError};
use crate::parser::{parse_source, ParseError};
use crate::promptgen::{
    assemble_few_shot, build_prompt_with, AblationMask, PromptError, PromptOptions,
};
use crate::retrieval::{
    load_index_cache, resolve_matches, save_index_cache, top_k_excluding, uuid_fingerprint,
    EmbeddingProvider, LocalHashingEmbedder, RemoteEmbedder, RemoteEmbedderConfig, RetrievalError,
    RetrievalIndex, SavedResults,
};

pub use config::{BackendKind, EmbedderKind, PipelineConfig, ALLOWED_SHOTS, ENV_PREFIX};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    CallGraph(#[from] CallGraphError),
    #[error("{path}:{}:{}: {}", source.line, source.column, source.message)]
    Parse { path: String, source: ParseError },
    #[error("repository has no splits; run `split` first")]
    NoSplits,
    #[error("no targets selected by `{0}`")]
    NoTargets(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Which samples a command operates on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetSelector {
    Split(String),
    Uuids(Vec<String>),
    /// Matches sample source paths.
    Glob(String),
}

impl Default for TargetSelector {
    fn default() -> Self {
        TargetSelector::Split("test".into())
    }
}

impl FromStr for TargetSelector {
    type Err = PipelineError;

    /// `train`, `validation`, `test`, `split:<name>`, `uuid:<a,b,..>` or
    /// `glob:<pattern>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let selector = match s.split_once(':') {
            Some(("split", name)) => TargetSelector::Split(name.to_string()),
            Some(("uuid", list)) => TargetSelector::Uuids(
                list.split(',')
                    .map(str::trim)
                    .filter(|u| !u.is_empty())
                    .map(String::from)
                    .collect(),
            ),
            Some(("glob", pattern)) => TargetSelector::Glob(pattern.to_string()),
            None if matches!(s, "train" | "validation" | "test") => {
                TargetSelector::Split(s.to_string())
            }
            _ => {
                return Err(PipelineError::Config(format!(
                    "invalid target selector `{s}`"
                )))
            }
        };
        if let TargetSelector::Split(name) = &selector {
            if !matches!(name.as_str(), "train" | "validation" | "test") {
                return Err(PipelineError::Config(format!("unknown split `{name}`")));
            }
        }
        if let TargetSelector::Glob(p) = &selector {
            glob::Pattern::new(p)
                .map_err(|e| PipelineError::Config(format!("invalid glob `{p}`: {e}")))?;
        }
        Ok(selector)
    }
}

impl std::fmt::Display for TargetSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetSelector::Split(name) => write!(f, "split:{name}"),
            TargetSelector::Uuids(list) => write!(f, "uuid:{}", list.join(",")),
            TargetSelector::Glob(p) => write!(f, "glob:{p}"),
        }
    }
}

fn split_members<'a>(splits: &'a Splits, name: &str) -> &'a [String] {
    match name {
        "train" => &splits.train,
        "validation" => &splits.validation,
        _ => &splits.test,
    }
}

/// Sorted uuids selected from `repo`.
pub fn select_targets(
    repo: &Repository,
    selector: &TargetSelector,
) -> Result<Vec<String>, PipelineError> {
    let mut out: Vec<String> = match selector {
        TargetSelector::Split(name) => {
            split_members(repo.splits().ok_or(PipelineError::NoSplits)?, name).to_vec()
        }
        TargetSelector::Uuids(list) => {
            if let Some(missing) = list.iter().find(|u| !repo.index().contains_key(*u)) {
                return Err(CorpusError::UnknownSample(missing.clone()).into());
            }
            list.clone()
        }
        TargetSelector::Glob(p) => {
            let pattern = glob::Pattern::new(p)
                .map_err(|e| PipelineError::Config(format!("invalid glob `{p}`: {e}")))?;
            repo.index()
                .iter()
                .filter(|(_, e)| pattern.matches(&e.path))
                .map(|(u, _)| u.clone())
                .collect()
        }
    };
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn open_repository(config: &PipelineConfig) -> Result<Repository, PipelineError> {
    let mut repo = Repository::open(&config.repo_root)?;
    repo.filter = config.filter.clone();
    repo.max_depth = config.max_depth;
    Ok(repo)
}

pub fn make_embedder(config: &PipelineConfig) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
    config.validate()?;
    Ok(match config.embedder {
        EmbedderKind::Local => Box::new(LocalHashingEmbedder::new(config.embed_dims)),
        EmbedderKind::Remote => {
            let mut remote =
                RemoteEmbedderConfig::new(config.embed_endpoint.clone().unwrap_or_default());
            remote.dims = config.embed_dims;
            remote.token = std::env::var(&config.embed_token_env).ok();
            remote.max_in_flight = config.max_in_flight;
            remote.retry = RetryPolicy {
                max_retries: config.max_retries,
                ..RetryPolicy::default()
            };
            Box::new(RemoteEmbedder::new(remote))
        }
    })
}

pub fn make_backend(config: &PipelineConfig) -> Result<Box<dyn Backend>, PipelineError> {
    config.validate()?;
    Ok(match config.backend {
        BackendKind::Mock => Box::new(MockBackend),
        BackendKind::Remote => {
            let mut remote = RemoteChatConfig::new(config.llm_endpoint.clone().unwrap_or_default());
            remote.api_key = std::env::var(&config.api_key_env).ok();
            remote.requests_per_second = config.requests_per_second;
            remote.burst = config.max_in_flight as u32;
            remote.send_attachments = config.send_attachments;
            remote.retry = RetryPolicy {
                max_retries: config.max_retries,
                ..RetryPolicy::default()
            };
            Box::new(RemoteChatBackend::new(remote))
        }
    })
}

fn sol_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            PipelineError::Io {
                path,
                source: e.into(),
            }
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "sol") {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

/// Ingests files and directories (searched recursively for `.sol` files).
/// Samples record paths relative to the directory argument, or the bare
/// file name for file arguments.
pub fn cmd_ingest(
    config: &PipelineConfig,
    paths: &[PathBuf],
) -> Result<IngestReport, PipelineError> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    for path in paths {
        let meta = std::fs::metadata(path).map_err(|e| PipelineError::io(path, e))?;
        if meta.is_dir() {
            for file in sol_files(path)? {
                let rel = file
                    .strip_prefix(path)
                    .unwrap_or(&file)
                    .to_string_lossy()
                    .replace('\\', "/");
                files.push((file, rel));
            }
        } else {
            let name = path.file_name().map_or_else(
                || path.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            );
            files.push((path.clone(), name));
        }
    }
    let mut repo = open_repository(config)?;
    Ok(repo.ingest_many(&files)?)
}

pub fn format_ingest(report: &IngestReport) -> String {
    let mut out = String::new();
    for (path, n) in &report.per_file {
        out.push_str(&format!(
            "{path}: {n} {}\n",
            if *n == 1 { "sample" } else { "samples" }
        ));
    }
    for (path, message) in &report.failures {
        out.push_str(&format!("{path}: skipped: {message}\n"));
    }
    let total: usize = report.per_file.iter().map(|(_, n)| n).sum();
    out.push_str(&format!(
        "{} {}, {} {} ({} new)\n",
        report.files,
        if report.files == 1 { "file" } else { "files" },
        total,
        if total == 1 { "sample" } else { "samples" },
        report.added
    ));
    out
}

pub fn cmd_split(config: &PipelineConfig) -> Result<Splits, PipelineError> {
    let mut repo = open_repository(config)?;
    Ok(repo.split_dataset(config.ratios, config.split_seed)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub entries: usize,
    pub provider_id: String,
    pub cache_hit: bool,
}

fn cache_path(repo: &Repository) -> PathBuf {
    repo.root().join("index.embeddings.bin")
}

/// Loads the train-split index from the cache, rebuilding it when the cache
/// is missing, built by another provider, or covers other samples.
pub fn ensure_index(
    repo: &Repository,
    provider: &dyn EmbeddingProvider,
) -> Result<(RetrievalIndex, bool), PipelineError> {
    let splits = repo.splits().ok_or(PipelineError::NoSplits)?;
    let mut train = splits.train.clone();
    train.sort();
    let fingerprint = uuid_fingerprint(train.iter().map(String::as_str));
    let path = cache_path(repo);
    if let Some(index) = load_index_cache(&path, &provider.id(), &fingerprint)? {
        log::info!(
            "embedding cache hit: {} entries from `{}`",
            index.len(),
            index.provider_id
        );
        return Ok((index, true));
    }
    let samples = repo.load_samples(&train)?;
    let items: Vec<(String, String)> = samples
        .iter()
        .map(|s| (s.uuid.clone(), s.code.clone()))
        .collect();
    let index = RetrievalIndex::build(provider, &items)?;
    save_index_cache(&index, &path)?;
    repo.set_embeddings(&index.entries)?;
    log::info!(
        "built embedding index: {} entries with `{}`",
        index.len(),
        index.provider_id
    );
    Ok((index, false))
}

pub fn cmd_index(config: &PipelineConfig) -> Result<IndexSummary, PipelineError> {
    let repo = open_repository(config)?;
    let provider = make_embedder(config)?;
    let (index, cache_hit) = ensure_index(&repo, provider.as_ref())?;
    Ok(IndexSummary {
        entries: index.len(),
        provider_id: index.provider_id,
        cache_hit,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub uuid: String,
    pub contract: String,
    pub function: String,
    pub prompt: String,
    pub token_count: usize,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub selector: String,
    pub targets: Vec<String>,
    pub index_provider: Option<String>,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub outputs: usize,
}

fn mask_slug(mask: &AblationMask) -> String {
    match mask.label().as_str() {
        "ALL" => "all".into(),
        "-ALL" => "none".into(),
        label => label
            .split_whitespace()
            .map(|p| {
                format!(
                    "no-{}",
                    p.trim_start_matches('-').to_lowercase().replace('&', "")
                )
            })
            .collect::<Vec<_>>()
            .join("-"),
    }
}

/// Deterministic run identifier derived from the portable config and the
/// target selection.
pub fn run_id(config: &PipelineConfig, selector: &TargetSelector) -> String {
    let digest = Sha256::digest(format!("{}\n{selector}", config.hash()).as_bytes());
    format!(
        "{}-k{}-{}",
        mask_slug(&config.mask),
        config.shots,
        &hex::encode(digest)[..12]
    )
}

fn summarize_one(
    config: &PipelineConfig,
    repo: &Repository,
    backend: &dyn Backend,
    index: Option<&RetrievalIndex>,
    query: Option<&crate::retrieval::EmbeddingVector>,
    sample: &CodeSample,
    run_dir: &Path,
) -> Result<SummaryRecord, PipelineError> {
    let shots = match (index, query) {
        (Some(index), Some(q)) => assemble_few_shot(repo, index, &sample.uuid, q, config.shots)?,
        _ => Vec::new(),
    };
    let mut options = PromptOptions {
        inner_line_budget: config.inner_line_budget,
        call_graph_png: None,
    };
    if config.render_png && config.mask.include_cfg {
        let graphs = run_dir.join("graphs");
        std::fs::create_dir_all(&graphs).map_err(|e| PipelineError::io(&graphs, e))?;
        let png = graphs.join(format!("{}.png", sample.uuid));
        if render_png(&sample.dot, &png).map_err(|e| PipelineError::io(&png, e))? {
            options.call_graph_png = Some(png);
        }
    }
    let bundle = build_prompt_with(&sample.facts, &sample.code, &shots, config.mask, &options);
    let prompt = bundle.render();
    let mut request = LlmRequest::new(prompt.clone(), config.model_id.clone());
    request.attachment = bundle.attachment.clone();
    request.max_output_tokens = config.max_output_tokens;
    request.temperature = config.temperature;
    let response = summarize(backend, &request)?;
    log::debug!(
        "{}: {} prompt tokens, {} ms",
        sample.uuid,
        bundle.token_count,
        response.latency_ms
    );
    Ok(SummaryRecord {
        uuid: sample.uuid.clone(),
        contract: sample.contract.clone(),
        function: sample.function.clone(),
        prompt,
        token_count: bundle.token_count,
        summary: response.summary,
    })
}

/// Builds prompts for the selected samples, queries the backend and writes
/// one output file per sample plus the run manifest.
pub fn cmd_summarize(
    config: &PipelineConfig,
    selector: &TargetSelector,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let repo = open_repository(config)?;
    let targets = select_targets(&repo, selector)?;
    if targets.is_empty() {
        return Err(PipelineError::NoTargets(selector.to_string()));
    }
    let samples = repo.load_samples(&targets)?;
    let backend = make_backend(config)?;

    let (index, queries) = if config.shots > 0 {
        let provider = make_embedder(config)?;
        let (index, _) = ensure_index(&repo, provider.as_ref())?;
        let codes: Vec<&str> = samples.iter().map(|s| s.code.as_str()).collect();
        (Some(index), provider.embed_batch(&codes)?)
    } else {
        (None, Vec::new())
    };

    let run_id = run_id(config, selector);
    let run_dir = repo.root().join("runs").join(&run_id);
    let outputs = run_dir.join("outputs");
    std::fs::create_dir_all(&outputs).map_err(|e| PipelineError::io(&outputs, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<SummaryRecord> = pool.install(|| {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, sample)| {
                summarize_one(
                    config,
                    &repo,
                    backend.as_ref(),
                    index.as_ref(),
                    queries.get(i),
                    sample,
                    &run_dir,
                )
            })
            .collect::<Result<_, _>>()
    })?;
    for record in &records {
        write_json(&outputs.join(format!("{}.json", record.uuid)), record)?;
    }

    let manifest = RunManifest {
        run_id: run_id.clone(),
        config: config.portable_json(),
        config_hash: config.hash(),
        selector: selector.to_string(),
        targets,
        index_provider: index.map(|i| i.provider_id),
        created_at: chrono::Utc::now().to_rfc3339(),
    };
    write_json(&run_dir.join("manifest.json"), &manifest)?;
    Ok(RunSummary {
        run_id,
        run_dir,
        outputs: records.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Outputs whose reference sample is no longer in the repository.
    pub skipped: usize,
    #[serde(flatten)]
    pub report: MetricReport,
}

pub fn read_run_outputs(run_dir: &Path) -> Result<Vec<SummaryRecord>, PipelineError> {
    let dir = run_dir.join("outputs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| PipelineError::io(&dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
            serde_json::from_str(&text).map_err(|source| {
                CorpusError::Json {
                    path: p.clone(),
                    source,
                }
                .into()
            })
        })
        .collect()
}

/// Scores each output of `run_dir` against its sample's reference comment
/// and writes `report.json` and `report.txt` into the run.
pub fn cmd_evaluate(
    config: &PipelineConfig,
    run_dir: &Path,
) -> Result<EvaluationReport, PipelineError> {
    let repo = open_repository(config)?;
    let records = read_run_outputs(run_dir)?;
    let mut skipped = 0;
    let mut pairs = Vec::new();
    for record in records {
        match repo.load_sample(&record.uuid) {
            Ok(sample) => pairs.push((record.uuid, record.summary, sample.comment)),
            Err(CorpusError::UnknownSample(_)) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} outputs have no reference in the repository and were skipped");
    }
    let report = EvaluationReport {
        skipped,
        report: evaluate_corpus(&pairs)?,
    };
    write_json(&run_dir.join("report.json"), &report)?;
    let table = report.report.to_table();
    let path = run_dir.join("report.txt");
    std::fs::write(&path, &table).map_err(|e| PipelineError::io(&path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub mask: AblationMask,
    pub run_id: String,
    pub n: usize,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub bleurt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "Method", "BLEU-4", "METEOR", "ROUGE-L", "BLEURT"
        );
        for r in &self.rows {
            let bleurt = r
                .bleurt
                .map_or_else(|| "-".to_string(), |b| format!("{b:.2}"));
            out.push_str(&format!(
                "{:<8}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8}\n",
                r.label, r.bleu4, r.meteor, r.rouge_l, bleurt
            ));
        }
        out
    }
}

/// Summarizes and evaluates the same targets under each ablation mask.
pub fn cmd_ablate(
    config: &PipelineConfig,
    selector: &TargetSelector,
) -> Result<(AblationTable, PathBuf), PipelineError> {
    let mut rows = Vec::new();
    for mask in AblationMask::ablation_rows() {
        let run_config = PipelineConfig {
            mask,
            ..config.clone()
        };
        let run = cmd_summarize(&run_config, selector)?;
        let eval = cmd_evaluate(&run_config, &run.run_dir)?;
        let c = &eval.report.corpus;
        rows.push(AblationRow {
            label: mask.label(),
            mask,
            run_id: run.run_id,
            n: eval.report.n,
            bleu4: c.bleu4,
            meteor: c.meteor,
            rouge_l: c.rouge_l,
            bleurt: c.bleurt,
        });
    }
    let table = AblationTable { rows };
    let base = PipelineConfig {
        mask: AblationMask::ALL,
        ..config.clone()
    };
    let digest = hex::encode(Sha256::digest(
        format!("{}\n{selector}", base.hash()).as_bytes(),
    ));
    let dir =
        config
            .repo_root
            .join("runs")
            .join(format!("ablation-k{}-{}", config.shots, &digest[..12]));
    std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    write_json(&dir.join("ablation.json"), &table)?;
    let txt = dir.join("ablation.txt");
    std::fs::write(&txt, table.to_table()).map_err(|e| PipelineError::io(&txt, e))?;
    Ok((table, dir))
}

/// DOT text of one function's call tree, read straight from a source file.
pub fn calltree(
    file: &Path,
    contract: &str,
    function: &str,
    max_depth: usize,
    png: Option<&Path>,
) -> Result<String, PipelineError> {
    let text = std::fs::read_to_string(file).map_err(|e| PipelineError::io(file, e))?;
    let path = file.display().to_string();
    let unit =
        parse_source(&text, &path).map_err(|source| PipelineError::Parse { path, source })?;
    let tree = graft_call_tree(&build_reference_tree(&unit), contract, function, max_depth)?;
    let dot = to_dot(&tree);
    if let Some(out) = png {
        render_png(&dot, out).map_err(|e| PipelineError::io(out, e))?;
    }
    Ok(dot)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetrieveQuery {
    /// A stored sample, excluded from its own results.
    Sample(String),
    Text(String),
}

/// Top-`k` train samples for the query, with code and comments attached.
pub fn cmd_retrieve(
    config: &PipelineConfig,
    query: &RetrieveQuery,
    k: usize,
    out: Option<&Path>,
) -> Result<SavedResults, PipelineError> {
    let repo = open_repository(config)?;
    let provider = make_embedder(config)?;
    let (index, _) = ensure_index(&repo, provider.as_ref())?;
    let (query_id, text) = match query {
        RetrieveQuery::Sample(uuid) => (uuid.clone(), repo.load_sample(uuid)?.code),
        RetrieveQuery::Text(text) => ("text".to_string(), text.clone()),
    };
    let vector = provider.embed(&text)?;
    let exclude: Vec<&str> = match query {
        RetrieveQuery::Sample(uuid) => vec![uuid.as_str()],
        RetrieveQuery::Text(_) => Vec::new(),
    };
    let result = top_k_excluding(&index, &query_id, &vector, k, &exclude)?;
    let lookup = |uuid: &str| repo.load_sample(uuid).ok().map(|s| (s.code, s.comment));
    let saved = resolve_matches(&result, lookup);
    if let Some(path) = out {
        write_json(path, &saved)?;
    }
    Ok(saved)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors() {
        assert_eq!(
            "test".parse::<TargetSelector>().unwrap(),
            TargetSelector::Split("test".into())
        );
        assert_eq!(
            "uuid:a, b".parse::<TargetSelector>().unwrap(),
            TargetSelector::Uuids(vec!["a".into(), "b".into()])
        );
        assert_eq!(
            "glob:*.sol".parse::<TargetSelector>().unwrap().to_string(),
            "glob:*.sol"
        );
        assert!("split:dev".parse::<TargetSelector>().is_err());
        assert!("bogus".parse::<TargetSelector>().is_err());
    }

    #[test]
    fn run_ids_follow_config() {
        let c = PipelineConfig::default();
        let sel = TargetSelector::default();
        assert_eq!(
            run_id(&c, &sel),
            run_id(
                &PipelineConfig {
                    repo_root: "/x".into(),
                    ..c.clone()
                },
                &sel
            )
        );
        assert!(run_id(&c, &sel).starts_with("all-k0-"));
        let masked = PipelineConfig {
            mask: AblationMask {
                include_cfg: false,
                ..AblationMask::ALL
            },
            ..c.clone()
        };
        assert!(run_id(&masked, &sel).starts_with("no-cfg-k0-"));
        assert!(run_id(
            &PipelineConfig {
                mask: AblationMask::NONE,
                ..c
            },
            &sel
        )
        .starts_with("none-k0-"));
    }
}
