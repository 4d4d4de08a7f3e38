mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use solsum_core::corpus::Repository;
use solsum_core::pipeline::{
    self, calltree, cmd_ablate, cmd_evaluate, cmd_index, cmd_ingest, cmd_retrieve, cmd_summarize,
    format_ingest, read_run_outputs, select_targets, EvaluationReport, PipelineConfig,
    RetrieveQuery, RunManifest, SummaryRecord, TargetSelector,
};
use solsum_core::promptgen::AblationMask;

use common::*;

/// Relative path → bytes for every file under `dir`, with the manifest's
/// timestamp blanked.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.unwrap();
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .unwrap()
            .to_string_lossy()
            .into_owned();
        let mut bytes = std::fs::read(entry.path()).unwrap();
        if rel.ends_with("manifest.json") {
            let mut m: RunManifest = serde_json::from_slice(&bytes).unwrap();
            m.created_at.clear();
            bytes = serde_json::to_vec(&m).unwrap();
        }
        out.insert(rel, bytes);
    }
    out
}

fn full_run(dir: &Path) -> std::path::PathBuf {
    let config = PipelineConfig {
        shots: 3,
        ..prepared_repo(dir)
    };
    let run = cmd_summarize(&config, &TargetSelector::default()).unwrap();
    cmd_evaluate(&config, &run.run_dir).unwrap();
    run.run_dir
}

#[test]
fn end_to_end_runs_are_byte_identical() {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run_a = full_run(a.path());
    let run_b = full_run(b.path());
    assert_eq!(run_a.file_name(), run_b.file_name());
    let snap_a = snapshot(a.path());
    assert_eq!(snap_a, snapshot(b.path()));
    assert!(snap_a.keys().any(|k| k.ends_with("report.json")));

    // rerunning in place reproduces the same bytes
    full_run(a.path());
    assert_eq!(snapshot(a.path()), snap_a);
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn summarize_outputs_follow_config() {
    let dir = tempfile::tempdir().unwrap();
    let base = prepared_repo(dir.path());
    let repo = Repository::open(dir.path()).unwrap();
    let targets: Vec<String> = select_targets(&repo, &TargetSelector::default())
        .unwrap()
        .into_iter()
        .take(5)
        .collect();
    let selector = TargetSelector::Uuids(targets.clone());

    let three = cmd_summarize(
        &PipelineConfig {
            shots: 3,
            ..base.clone()
        },
        &selector,
    )
    .unwrap();
    assert_eq!(three.outputs, 5);
    for record in read_run_outputs(&three.run_dir).unwrap() {
        assert!(record.prompt.contains("Example 3:\n") && !record.prompt.contains("Example 4:"));
        assert_eq!(
            record.summary,
            solsum_core::llmclient::mock_summary(&record.prompt)
        );
    }
    let manifest: RunManifest = serde_json::from_str(
        &std::fs::read_to_string(three.run_dir.join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest.targets, {
        let mut t = targets.clone();
        t.sort();
        t
    });
    assert_eq!(
        manifest.config_hash,
        PipelineConfig {
            shots: 3,
            ..base.clone()
        }
        .hash()
    );
    assert!(manifest.config.get("repo_root").is_none());

    let no_cfg = PipelineConfig {
        mask: AblationMask {
            include_cfg: false,
            ..AblationMask::ALL
        },
        ..base.clone()
    };
    let run = cmd_summarize(&no_cfg, &selector).unwrap();
    assert_ne!(run.run_id, three.run_id);
    for record in read_run_outputs(&run.run_dir).unwrap() {
        assert!(!record.prompt.contains("[CALL_GRAPH]"));
        assert!(record.prompt.contains("[INNER_FUNCTIONS]"));
    }
}

#[test]
fn evaluate_identity_and_missing_references() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared_repo(dir.path());
    let run = cmd_summarize(&config, &TargetSelector::default()).unwrap();
    let repo = Repository::open(dir.path()).unwrap();
    for mut record in read_run_outputs(&run.run_dir).unwrap() {
        record.summary = repo.load_sample(&record.uuid).unwrap().comment;
        let path = run
            .run_dir
            .join("outputs")
            .join(format!("{}.json", record.uuid));
        std::fs::write(path, serde_json::to_string_pretty(&record).unwrap()).unwrap();
    }
    let orphan = SummaryRecord {
        uuid: "00000000-0000-4000-8000-000000000000".into(),
        contract: "X".into(),
        function: "f".into(),
        prompt: "p".into(),
        token_count: 1,
        summary: "s".into(),
    };
    let path = run
        .run_dir
        .join("outputs")
        .join(format!("{}.json", orphan.uuid));
    std::fs::write(path, serde_json::to_string(&orphan).unwrap()).unwrap();

    let report = cmd_evaluate(&config, &run.run_dir).unwrap();
    assert_eq!(report.skipped, 1);
    assert_eq!(report.report.corpus.bleu4, 100.0);
    assert_eq!(report.report.corpus.rouge_l, 100.0);
    let saved: EvaluationReport =
        serde_json::from_str(&std::fs::read_to_string(run.run_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(saved, report);
    assert!(std::fs::read_to_string(run.run_dir.join("report.txt"))
        .unwrap()
        .contains("mean"));
}

#[test]
fn golden_mock_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared_repo(dir.path());
    let run = cmd_summarize(&config, &TargetSelector::default()).unwrap();
    cmd_evaluate(&config, &run.run_dir).unwrap();
    let report = std::fs::read_to_string(run.run_dir.join("report.txt")).unwrap();
    let golden = std::fs::read_to_string(fixture_dir().join("golden/mock_report.txt")).unwrap();
    assert_eq!(report, golden);
}

#[test]
fn ablation_table_has_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared_repo(dir.path());
    let (table, out) = cmd_ablate(&config, &TargetSelector::default()).unwrap();
    let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["ALL", "-CFG", "-IF", "-Id&MGV", "-ALL"]);
    let (all, none) = (&table.rows[0], &table.rows[4]);
    assert!(none.bleu4 <= all.bleu4 && none.meteor <= all.meteor && none.rouge_l <= all.rouge_l);
    let text = std::fs::read_to_string(out.join("ablation.txt")).unwrap();
    assert!(text.starts_with("Method"));
    assert_eq!(text.lines().count(), 6);
    assert!(out.join("ablation.json").is_file());
}

/// Test-split targets whose call tree has at least one callee.
fn targets_with_callees(repo: &Repository) -> Vec<String> {
    let test = select_targets(repo, &TargetSelector::default()).unwrap();
    repo.load_samples(&test)
        .unwrap()
        .into_iter()
        .filter(|s| !s.facts.call_tree.root.children.is_empty())
        .map(|s| s.uuid)
        .collect()
}

#[test]
fn structure_lifts_mock_scores() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared_repo(dir.path());
    let repo = Repository::open(dir.path()).unwrap();
    let targets = targets_with_callees(&repo);
    assert!(targets.len() >= 10, "{}", targets.len());
    let selector = TargetSelector::Uuids(targets);
    let score = |mask| {
        let c = PipelineConfig {
            mask,
            ..config.clone()
        };
        let run = cmd_summarize(&c, &selector).unwrap();
        cmd_evaluate(&c, &run.run_dir)
            .unwrap()
            .report
            .corpus
            .rouge_l
    };
    let (full, none) = (score(AblationMask::ALL), score(AblationMask::NONE));
    assert!(full > none, "{full} vs {none}");
}

#[test]
fn index_is_cached_per_provider() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared_repo(dir.path());
    let repo = Repository::open(dir.path()).unwrap();
    let train = repo.splits().unwrap().train.len();
    let again = cmd_index(&config).unwrap();
    assert!(again.cache_hit);
    assert_eq!(again.entries, train);
    let other = cmd_index(&PipelineConfig {
        embed_dims: 64,
        ..config.clone()
    })
    .unwrap();
    assert!(!other.cache_hit);
    assert_eq!(other.provider_id, "local-hash-v1:64");
    let sample = repo.load_sample(&repo.splits().unwrap().train[0]).unwrap();
    assert_eq!(sample.embedding.unwrap().dims(), 64);
}

#[test]
fn ingest_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = test_config(&dir.path().join("repo"));
    let report = cmd_ingest(&config, &[corpus_dir().join("vault.sol")]).unwrap();
    assert!(format_ingest(&report).ends_with("1 file, 3 samples (3 new)\n"));
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let report = cmd_ingest(&config, &[empty]).unwrap();
    assert!(format_ingest(&report).starts_with("0 files, 0 samples"));
    let err = cmd_ingest(&config, &[dir.path().join("nope.sol")]).unwrap_err();
    assert!(err.to_string().contains("nope.sol"));
}

#[test]
fn selectors_and_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let config = prepared_repo(dir.path());
    let repo = Repository::open(dir.path()).unwrap();
    let vault = select_targets(&repo, &"glob:vault*".parse().unwrap()).unwrap();
    assert_eq!(vault.len(), 3);
    assert!(matches!(
        select_targets(&repo, &TargetSelector::Uuids(vec!["missing".into()])),
        Err(pipeline::PipelineError::Corpus(_))
    ));

    let train = &repo.splits().unwrap().train;
    let out = dir.path().join("r.json");
    let saved = cmd_retrieve(
        &config,
        &RetrieveQuery::Sample(train[0].clone()),
        3,
        Some(&out),
    )
    .unwrap();
    assert_eq!(saved.matches.len(), 3);
    assert!(saved.matches.iter().all(|m| m.uuid != train[0]));
    assert!(out.is_file());
    let by_text = cmd_retrieve(
        &config,
        &RetrieveQuery::Text("function mint() {}".into()),
        1,
        None,
    )
    .unwrap();
    assert_eq!(by_text.matches.len(), 1);
}

#[test]
fn calltree_prints_dot() {
    let dot = calltree(
        &corpus_dir().join("collectible.sol"),
        "Collectible",
        "transferFrom",
        5,
        None,
    )
    .unwrap();
    assert!(dot.starts_with("digraph calltree {"));
    assert!(dot.contains("label=\"Collectible.removeTokenFrom\""));
    assert!(calltree(
        &corpus_dir().join("collectible.sol"),
        "Collectible",
        "nope",
        5,
        None
    )
    .is_err());
}
