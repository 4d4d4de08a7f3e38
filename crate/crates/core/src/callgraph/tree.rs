use serde::{Deserialize, Serialize};

use super::{CallGraphError, RefTree, EXTERNAL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallNode {
    pub contract: String,
    pub function: String,
    /// Number of call sites in the parent's body (1 for the root).
    pub count: usize,
    pub children: Vec<CallNode>,
    /// Set when this node repeats an ancestor; such nodes are never expanded.
    pub cycle: bool,
}

impl CallNode {
    fn leaf(contract: &str, function: &str, count: usize, cycle: bool) -> Self {
        CallNode {
            contract: contract.to_string(),
            function: function.to_string(),
            count,
            children: Vec::new(),
            cycle,
        }
    }

    pub fn is_external(&self) -> bool {
        self.contract == EXTERNAL
    }

    /// Pre-order traversal yielding `(depth, node)`, root at depth 1.
    pub fn walk(&self) -> Vec<(usize, &CallNode)> {
        let mut out = Vec::new();
        let mut stack = vec![(1usize, self)];
        while let Some((depth, node)) = stack.pop() {
            out.push((depth, node));
            stack.extend(node.children.iter().rev().map(|c| (depth + 1, c)));
        }
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(CallNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTree {
    pub root: CallNode,
    pub max_depth: usize,
}

impl CallTree {
    pub fn node_count(&self) -> usize {
        self.root.walk().len()
    }
}

/// Expands the reference entries of `contract.function` into a complete call
/// tree of at most `max_depth` levels (the root is level 1).
pub fn graft_call_tree(
    reference: &RefTree,
    contract: &str,
    function: &str,
    max_depth: usize,
) -> Result<CallTree, CallGraphError> {
    if max_depth == 0 {
        return Err(CallGraphError::InvalidDepth);
    }
    if !reference.contains(contract, function) {
        return Err(CallGraphError::UnknownFunction {
            contract: contract.to_string(),
            function: function.to_string(),
        });
    }

    let mut path = vec![(contract.to_string(), function.to_string())];
    let mut root = CallNode::leaf(contract, function, 1, false);
    root.children = expand(reference, contract, function, 1, max_depth, &mut path);
    Ok(CallTree { root, max_depth })
}

fn expand(
    reference: &RefTree,
    contract: &str,
    function: &str,
    depth: usize,
    max_depth: usize,
    path: &mut Vec<(String, String)>,
) -> Vec<CallNode> {
    if depth >= max_depth {
        return Vec::new();
    }
    let Some(callees) = reference.callees(contract, function) else {
        return Vec::new();
    };

    let mut entries: Vec<_> = callees.iter().collect();
    entries.sort_by_key(|(_, e)| e.first_offset);

    entries
        .into_iter()
        .map(|(name, entry)| {
            let owner = entry.defining_contract.as_str();
            if owner == EXTERNAL {
                return CallNode::leaf(owner, name, entry.count, false);
            }
            if path.iter().any(|(c, f)| c == owner && f == name) {
                return CallNode::leaf(owner, name, entry.count, true);
            }
            path.push((owner.to_string(), name.clone()));
            let children = expand(reference, owner, name, depth + 1, max_depth, path);
            path.pop();
            CallNode {
                children,
                ..CallNode::leaf(owner, name, entry.count, false)
            }
        })
        .collect()
}
