use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::process::Command;

use super::{CallNode, CallTree};

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a call tree as a Graphviz digraph. Output depends only on the tree.
pub fn to_dot(tree: &CallTree) -> String {
    let mut out = String::from(
        "digraph calltree {\n    rankdir=LR;\n    node [shape=box, fontname=\"monospace\"];\n",
    );
    let mut next_id = 0usize;
    emit(&tree.root, None, &mut next_id, &mut out);
    out.push_str("}\n");
    out
}

fn emit(node: &CallNode, parent: Option<usize>, next_id: &mut usize, out: &mut String) {
    let id = *next_id;
    *next_id += 1;

    let label = escape(&format!("{}.{}", node.contract, node.function));
    let style = if node.cycle { ", style=dashed" } else { "" };
    let _ = writeln!(out, "    n{id} [label=\"{label}\"{style}];");
    if let Some(p) = parent {
        if node.count > 1 {
            let _ = writeln!(out, "    n{p} -> n{id} [label=\"×{}\"];", node.count);
        } else {
            let _ = writeln!(out, "    n{p} -> n{id};");
        }
    }
    for child in &node.children {
        emit(child, Some(id), next_id, out);
    }
}

fn find_on_path(binary: &str) -> Option<std::path::PathBuf> {
    let paths = std::env::var_os("PATH")?;
    std::env::split_paths(&paths)
        .map(|dir| dir.join(binary))
        .find(|candidate| candidate.is_file())
}

/// Renders DOT text to a PNG with the `dot` binary.
///
/// Returns `Ok(false)` with a warning when no renderer is installed.
pub fn render_png(dot: &str, out: &Path) -> io::Result<bool> {
    let Some(renderer) = find_on_path("dot") else {
        log::warn!(
            "graphviz `dot` not found on PATH; skipping {}",
            out.display()
        );
        return Ok(false);
    };
    let dot_file = out.with_extension("dot");
    std::fs::write(&dot_file, dot)?;
    let status = Command::new(renderer)
        .arg("-Tpng")
        .arg(&dot_file)
        .arg("-o")
        .arg(out)
        .status()?;
    if !status.success() {
        return Err(io::Error::other(format!(
            "dot exited with {status} for {}",
            out.display()
        )));
    }
    Ok(true)
}
