//! Prompt assembly: a fixed sequence of tagged sections built from semantic
//! facts, retrieved examples and the target code.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::{CallNode, CallTree};
use crate::corpus::{CorpusError, Repository};
use crate::retrieval::{top_k_excluding, EmbeddingVector, RetrievalError, RetrievalIndex};
use crate::semfacts::SemanticFacts;

pub const ROLE_TEXT: &str =
    "You are an expert Solidity auditor. You write concise, accurate summaries of smart contract functions.";
pub const INSTRUCTION_TEXT: &str =
    "Summarize what the target function does in one sentence, using the context above.";
pub const TRUNCATION_MARKER: &str = "…truncated…";
pub const DEFAULT_INNER_LINE_BUDGET: usize = 60;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Which fact groups the prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationMask {
    pub include_cfg: bool,
    pub include_inner_functions: bool,
    pub include_identifiers_and_globals: bool,
}

impl Default for AblationMask {
    fn default() -> Self {
        AblationMask::ALL
    }
}

impl AblationMask {
    pub const ALL: AblationMask = AblationMask {
        include_cfg: true,
        include_inner_functions: true,
        include_identifiers_and_globals: true,
    };
    pub const NONE: AblationMask = AblationMask {
        include_cfg: false,
        include_inner_functions: false,
        include_identifiers_and_globals: false,
    };

    /// The full prompt, each group removed in turn, and the bare prompt.
    pub fn ablation_rows() -> [AblationMask; 5] {
        [
            AblationMask::ALL,
            AblationMask {
                include_cfg: false,
                ..AblationMask::ALL
            },
            AblationMask {
                include_inner_functions: false,
                ..AblationMask::ALL
            },
            AblationMask {
                include_identifiers_and_globals: false,
                ..AblationMask::ALL
            },
            AblationMask::NONE,
        ]
    }

    pub fn label(&self) -> String {
        match (
            self.include_cfg,
            self.include_inner_functions,
            self.include_identifiers_and_globals,
        ) {
            (true, true, true) => "ALL".into(),
            (false, false, false) => "-ALL".into(),
            (cfg, inner, ids) => {
                let mut removed = Vec::new();
                if !cfg {
                    removed.push("-CFG");
                }
                if !inner {
                    removed.push("-IF");
                }
                if !ids {
                    removed.push("-Id&MGV");
                }
                removed.join(" ")
            }
        }
    }

    /// Parses `all`, `none`, or a comma-separated list of included groups
    /// drawn from `cfg`, `if`, `idgv`.
    pub fn parse(spec: &str) -> Result<AblationMask, String> {
        let spec = spec.trim();
        match spec.to_ascii_lowercase().as_str() {
            "all" => return Ok(AblationMask::ALL),
            "none" | "" => return Ok(AblationMask::NONE),
            _ => {}
        }
        let mut mask = AblationMask::NONE;
        for part in spec.split(',').map(|p| p.trim().to_ascii_lowercase()) {
            match part.as_str() {
                "cfg" => mask.include_cfg = true,
                "if" => mask.include_inner_functions = true,
                "idgv" | "id" => mask.include_identifiers_and_globals = true,
                other => {
                    return Err(format!(
                        "unknown mask component `{other}` (expected cfg, if, idgv, all or none)"
                    ))
                }
            }
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub code: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sections: Vec<(String, String)>,
    pub shots: Vec<Shot>,
    pub attachment: Option<PathBuf>,
    pub token_count: usize,
    pub mask: AblationMask,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        render_sections(&self.sections)
    }

    pub fn section(&self, tag: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, text)| text.as_str())
    }
}

fn render_sections(sections: &[(String, String)]) -> String {
    sections.iter().fold(String::new(), |mut out, (tag, text)| {
        let _ = write!(out, "[{tag}]\n{text}\n\n");
        out
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOptions {
    pub inner_line_budget: usize,
    /// Rendered call-graph image, attached only when the call graph is included.
    pub call_graph_png: Option<PathBuf>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            inner_line_budget: DEFAULT_INNER_LINE_BUDGET,
            call_graph_png: None,
        }
    }
}

/// Approximate token count: each maximal run of letters, digits and
/// underscores counts one, as does every other non-whitespace character.
pub fn count_tokens(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}

pub fn build_prompt(
    facts: &SemanticFacts,
    target_code: &str,
    shots: &[Shot],
    mask: AblationMask,
) -> PromptBundle {
    build_prompt_with(facts, target_code, shots, mask, &PromptOptions::default())
}

pub fn build_prompt_with(
    facts: &SemanticFacts,
    target_code: &str,
    shots: &[Shot],
    mask: AblationMask,
    options: &PromptOptions,
) -> PromptBundle {
    let mut sections: Vec<(String, String)> = vec![("ROLE".into(), ROLE_TEXT.into())];
    if mask.include_identifiers_and_globals {
        sections.push(("CONTRACT".into(), contract_section(facts)));
        sections.push(("IDENTIFIERS".into(), identifiers_section(facts)));
    }
    if mask.include_cfg {
        sections.push((
            "CALL_GRAPH".into(),
            call_graph_section(&facts.call_tree, &facts.cycles),
        ));
    }
    if mask.include_inner_functions {
        sections.push((
            "INNER_FUNCTIONS".into(),
            inner_functions_section(facts, options.inner_line_budget),
        ));
    }
    if !shots.is_empty() {
        sections.push(("EXAMPLES".into(), examples_section(shots)));
    }
    sections.push(("TARGET".into(), target_code.trim_end().to_string()));
    sections.push(("INSTRUCTION".into(), INSTRUCTION_TEXT.into()));

    let token_count = count_tokens(&render_sections(&sections));
    PromptBundle {
        sections,
        shots: shots.to_vec(),
        attachment: options.call_graph_png.clone().filter(|_| mask.include_cfg),
        token_count,
        mask,
    }
}

fn contract_section(facts: &SemanticFacts) -> String {
    let mut out = format!("Contract: {}\nGlobal variables:", facts.contract_name);
    if facts.global_vars.is_empty() {
        out.push_str(" none");
    }
    for g in &facts.global_vars {
        let _ = write!(out, "\n- {} {} {}", g.type_name, g.visibility, g.name);
    }
    out
}

fn identifiers_section(facts: &SemanticFacts) -> String {
    facts
        .identifiers
        .iter()
        .map(|i| match &i.type_name {
            Some(t) => format!("- {} ({}, {})", i.name, i.role.as_str(), t),
            None => format!("- {} ({})", i.name, i.role.as_str()),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One line per edge, `parent -> child [Contract]`, indented two spaces per
/// level below the target. Repeated calls carry `×n`; edges back to an
/// ancestor carry `(cycle)`.
pub fn call_graph_lines(tree: &CallTree) -> Vec<String> {
    fn visit(node: &CallNode, level: usize, out: &mut Vec<String>) {
        for child in &node.children {
            let mut line = format!(
                "{}{} -> {} [{}]",
                "  ".repeat(level),
                node.function,
                child.function,
                child.contract
            );
            if child.count > 1 {
                let _ = write!(line, " ×{}", child.count);
            }
            if child.cycle {
                line.push_str(" (cycle)");
            }
            out.push(line);
            visit(child, level + 1, out);
        }
    }
    let mut out = Vec::new();
    visit(&tree.root, 0, &mut out);
    out
}

fn call_graph_section(tree: &CallTree, cycles: &[Vec<(String, String)>]) -> String {
    let mut lines = call_graph_lines(tree);
    if lines.is_empty() {
        lines.push("(no internal calls)".into());
    }
    for cycle in cycles {
        let mut names: Vec<String> = cycle.iter().map(|(c, f)| format!("{c}.{f}")).collect();
        names.push(names[0].clone());
        lines.push(format!("cycle: {}", names.join(" -> ")));
    }
    lines.join("\n")
}

fn truncate_lines(body: &str, budget: usize) -> String {
    let lines: Vec<&str> = body.lines().collect();
    if lines.len() <= budget {
        return body.trim_end().to_string();
    }
    let mut out = lines[..budget].join("\n");
    out.push('\n');
    out.push_str(TRUNCATION_MARKER);
    out
}

fn inner_functions_section(facts: &SemanticFacts, budget: usize) -> String {
    if facts.inner_functions.is_empty() {
        return "(none)".into();
    }
    facts
        .inner_functions
        .iter()
        .map(|f| {
            format!(
                "// {}.{} (depth {})\n{}",
                f.contract,
                f.name,
                f.depth,
                truncate_lines(&f.body_text, budget)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn examples_section(shots: &[Shot]) -> String {
    shots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!(
                "Example {}:\nCode:\n{}\nSummary: {}",
                i + 1,
                s.code.trim_end(),
                s.comment
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Retrieves the `k` repository samples most similar to `query`, never
/// returning `target_uuid` itself, as `(code, comment)` shots.
pub fn assemble_few_shot(
    repo: &Repository,
    index: &RetrievalIndex,
    target_uuid: &str,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<Shot>, PromptError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let result = top_k_excluding(index, target_uuid, query, k, &[target_uuid])?;
    result
        .matches
        .iter()
        .map(|m| {
            let s = repo.load_sample(&m.uuid)?;
            Ok(Shot {
                code: s.code,
                comment: s.comment,
            })
        })
        .collect()
}
