use std::collections::BTreeMap;

use super::{RefTree, EXTERNAL};

pub type FunctionRef = (String, String);

/// Every elementary cycle of the resolved call relation.
///
/// Each cycle is reported once, rotated to start at its smallest
/// `(contract, function)` pair; the list is sorted.
pub fn detect_cycles(reference: &RefTree) -> Vec<Vec<FunctionRef>> {
    let mut nodes: Vec<FunctionRef> = reference
        .functions()
        .map(|(c, f)| (c.to_string(), f.to_string()))
        .collect();
    nodes.sort();
    nodes.dedup();
    let index: BTreeMap<&FunctionRef, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();

    let adjacency: Vec<Vec<usize>> = nodes
        .iter()
        .map(|(c, f)| {
            let mut out: Vec<usize> = reference
                .callees(c, f)
                .into_iter()
                .flatten()
                .filter(|(_, e)| e.defining_contract != EXTERNAL)
                .filter_map(|(name, e)| {
                    index
                        .get(&(e.defining_contract.clone(), name.clone()))
                        .copied()
                })
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();

    // A cycle is found from its smallest node only: the search from `start`
    // never enters nodes below it.
    let mut cycles = Vec::new();
    for start in 0..nodes.len() {
        let mut path = vec![start];
        let mut on_path = vec![false; nodes.len()];
        on_path[start] = true;
        search(
            start,
            start,
            &adjacency,
            &mut path,
            &mut on_path,
            &mut cycles,
        );
    }

    let mut out: Vec<Vec<FunctionRef>> = cycles
        .into_iter()
        .map(|c| c.into_iter().map(|i| nodes[i].clone()).collect())
        .collect();
    out.sort();
    out
}

fn search(
    start: usize,
    node: usize,
    adjacency: &[Vec<usize>],
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    cycles: &mut Vec<Vec<usize>>,
) {
    for &next in &adjacency[node] {
        if next == start {
            cycles.push(path.clone());
        } else if next > start && !on_path[next] {
            path.push(next);
            on_path[next] = true;
            search(start, next, adjacency, path, on_path, cycles);
            on_path[next] = false;
            path.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::build_reference_tree;
    use crate::parser::parse_source;

    fn cycles_of(src: &str) -> Vec<Vec<String>> {
        let reference = build_reference_tree(&parse_source(src, "t.sol").unwrap());
        detect_cycles(&reference)
            .into_iter()
            .map(|c| c.into_iter().map(|(c, f)| format!("{c}.{f}")).collect())
            .collect()
    }

    #[test]
    fn acyclic() {
        assert!(
            cycles_of("contract A { function a() public { b(); } function b() public {} }")
                .is_empty()
        );
    }

    #[test]
    fn self_loop_and_rotation() {
        let got = cycles_of(
            "contract A { function z() public { y(); } function y() public { z(); } \
             function r() public { r(); } }",
        );
        assert_eq!(
            got,
            vec![
                vec!["A.r".to_string()],
                vec!["A.y".to_string(), "A.z".to_string()]
            ]
        );
    }

    #[test]
    fn external_calls_do_not_close_cycles() {
        assert!(cycles_of("contract A { function a() public { ext(); } }").is_empty());
    }
}
