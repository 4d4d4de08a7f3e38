//! Function call trees.
//!
//! Construction happens in two passes. [`build_reference_tree`] records, for
//! every function, the direct callees and the contract each one resolves to.
//! [`graft_call_tree`] then replaces every callee entry with that callee's own
//! entries, recursively, producing a complete tree rooted at one function.
//! Expansion keeps a per-path visited set, so call cycles end in a marker leaf
//! instead of recursing forever.

mod cycles;
mod dot;
mod tree;

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{CallSite, ContractKind, SourceUnit};

pub use cycles::detect_cycles;
pub use dot::{render_png, to_dot};
pub use tree::{graft_call_tree, CallNode, CallTree};

/// Contract attribution for callees that no declaration in the unit matches.
pub const EXTERNAL: &str = "external";

/// Depth used when none is configured; typical call trees stay within it.
pub const DEFAULT_MAX_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallGraphError {
    #[error("unknown function `{contract}.{function}`")]
    UnknownFunction { contract: String, function: String },
    #[error("max_depth must be at least 1")]
    InvalidDepth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefEntry {
    pub defining_contract: String,
    pub count: usize,
    /// Byte offset of the first call site, used to order children.
    pub first_offset: usize,
}

pub type CalleeMap = IndexMap<String, RefEntry>;

/// One level of call information per function: contract → function → callee.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefTree {
    pub contracts: IndexMap<String, IndexMap<String, CalleeMap>>,
}

impl RefTree {
    pub fn callees(&self, contract: &str, function: &str) -> Option<&CalleeMap> {
        self.contracts.get(contract)?.get(function)
    }

    pub fn contains(&self, contract: &str, function: &str) -> bool {
        self.callees(contract, function).is_some()
    }

    /// Every `(contract, function)` pair in declaration order.
    pub fn functions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.contracts
            .iter()
            .flat_map(|(c, fs)| fs.keys().map(move |f| (c.as_str(), f.as_str())))
    }
}

/// Builds the reference tree for every function of every contract.
///
/// Overloads share a key: call sites bind by name only.
pub fn build_reference_tree(unit: &SourceUnit) -> RefTree {
    let mut tree = RefTree::default();
    for contract in &unit.contracts {
        let functions = tree.contracts.entry(contract.name.clone()).or_default();
        for f in &contract.functions {
            let callees = functions.entry(f.display_name().to_string()).or_default();
            for cs in &f.call_sites {
                callees
                    .entry(cs.callee_name.clone())
                    .and_modify(|e| e.count += 1)
                    .or_insert_with(|| RefEntry {
                        defining_contract: resolve_call_site(unit, &contract.name, cs),
                        count: 1,
                        first_offset: cs.offset,
                    });
            }
            callees.sort_by(|_, a, _, b| a.first_offset.cmp(&b.first_offset));
        }
    }
    tree
}

/// Base contracts of `contract`, transitively, depth-first in declaration
/// order. The contract itself is not included.
pub fn linearized_bases<'u>(unit: &'u SourceUnit, contract: &str) -> Vec<&'u str> {
    fn visit<'u>(
        unit: &'u SourceUnit,
        name: &str,
        seen: &mut HashSet<&'u str>,
        out: &mut Vec<&'u str>,
    ) {
        let Some(c) = unit.contract(name) else { return };
        for base in &c.bases {
            if let Some(b) = unit.contract(base) {
                if seen.insert(b.name.as_str()) {
                    out.push(b.name.as_str());
                    visit(unit, &b.name, seen, out);
                }
            }
        }
    }
    let mut seen = HashSet::new();
    if let Some(c) = unit.contract(contract) {
        seen.insert(c.name.as_str());
    }
    let mut out = Vec::new();
    visit(unit, contract, &mut seen, &mut out);
    out
}

/// Finds the contract that defines `callee` as seen from `caller_contract`:
/// the caller itself, then its bases, then any other contract or library in
/// the unit, and finally [`EXTERNAL`].
pub fn resolve_defining_contract(unit: &SourceUnit, caller_contract: &str, callee: &str) -> String {
    if unit
        .contract(caller_contract)
        .is_some_and(|c| c.defines(callee))
    {
        return caller_contract.to_string();
    }
    resolve_excluding_caller(unit, caller_contract, callee)
}

fn resolve_excluding_caller(unit: &SourceUnit, caller_contract: &str, callee: &str) -> String {
    let bases = linearized_bases(unit, caller_contract);
    if let Some(b) = bases
        .iter()
        .find(|b| unit.contract(b).is_some_and(|c| c.defines(callee)))
    {
        return b.to_string();
    }
    unit.contracts
        .iter()
        .filter(|c| c.kind != ContractKind::Interface && c.name != caller_contract)
        .find(|c| c.defines(callee))
        .map_or_else(|| EXTERNAL.to_string(), |c| c.name.clone())
}

/// Resolution that also honours two receiver forms: `super.f()` skips the
/// caller, and `Lib.f()` names the defining library directly.
fn resolve_call_site(unit: &SourceUnit, caller_contract: &str, cs: &CallSite) -> String {
    match cs.receiver.as_deref() {
        Some("super") => resolve_excluding_caller(unit, caller_contract, &cs.callee_name),
        Some(r) if unit.contract(r).is_some_and(|c| c.defines(&cs.callee_name)) => r.to_string(),
        _ => resolve_defining_contract(unit, caller_contract, &cs.callee_name),
    }
}
