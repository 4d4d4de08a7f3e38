mod common;

use std::time::Instant;

use indexmap::IndexMap;
use proptest::prelude::*;
use solsum_core::callgraph::{
    build_reference_tree, detect_cycles, graft_call_tree, to_dot, CallGraphError, RefEntry,
    RefTree, EXTERNAL,
};

use common::*;

#[test]
fn graft_matches_oracle_on_every_fixture_function() {
    let start = Instant::now();
    let files = corpus_files();
    assert!(files.len() >= 10);
    let mut checked = 0;
    for file in &files {
        let unit = parse_file(file);
        let fn_count: usize = unit.contracts.iter().map(|c| c.functions.len()).sum();
        assert!(
            fn_count <= 20,
            "{} has {fn_count} functions",
            file.display()
        );
        let reference = build_reference_tree(&unit);
        for (c, f) in reference.functions() {
            for depth in 1..=7 {
                let tree = graft_call_tree(&reference, c, f, depth).unwrap();
                assert_eq!(
                    tree_rows(&tree),
                    oracle_tree(&reference, c, f, depth),
                    "{c}.{f} depth {depth}"
                );
                assert!(tree.root.depth() <= depth);
                checked += 1;
            }
        }
    }
    assert!(checked > 300);
    assert!(start.elapsed().as_secs_f64() < 1.0, "{:?}", start.elapsed());
}

#[test]
fn fixtures_cover_inheritance_and_cross_contract_calls() {
    let unit = parse_fixture("crowdsale.sol");
    let reference = build_reference_tree(&unit);
    let tree = graft_call_tree(&reference, "Crowdsale", "buyTokens", 5).unwrap();
    let rows = tree_rows(&tree);
    assert!(
        rows.iter().any(|r| r.1 == "SaleToken" && r.2 == "mint"),
        "{rows:?}"
    );

    let capped = graft_call_tree(&reference, "CappedCrowdsale", "_preValidatePurchase", 5).unwrap();
    let names: Vec<_> = tree_rows(&capped)
        .into_iter()
        .map(|r| format!("{}.{}", r.1, r.2))
        .collect();
    assert_eq!(
        names,
        [
            "CappedCrowdsale._preValidatePurchase",
            "CappedCrowdsale.capReached",
            "Crowdsale._preValidatePurchase"
        ]
    );

    let unit = parse_fixture("auction.sol");
    let reference = build_reference_tree(&unit);
    let bid = graft_call_tree(&reference, "Auction", "bid", 5).unwrap();
    assert!(tree_rows(&bid)
        .iter()
        .any(|r| r.1 == "Pausable" && r.2 == "_whenNotPaused"));
}

#[test]
fn library_calls_resolve_to_the_library() {
    let reference = build_reference_tree(&parse_fixture("safe_token.sol"));
    let tree = graft_call_tree(&reference, "MintableToken", "mint", 5).unwrap();
    let rows = tree_rows(&tree);
    assert!(
        rows.iter()
            .any(|r| r.0 == 3 && r.1 == "SafeMath" && r.2 == "add" && r.3 == 2),
        "{rows:?}"
    );
}

#[test]
fn interface_and_member_calls_are_external() {
    let reference = build_reference_tree(&parse_fixture("staking.sol"));
    let tree = graft_call_tree(&reference, "Staking", "stake", 5).unwrap();
    let leaf = tree
        .root
        .children
        .iter()
        .find(|c| c.function == "transferFrom")
        .unwrap();
    assert_eq!(leaf.contract, EXTERNAL);
    assert!(leaf.children.is_empty());
}

#[test]
fn depth_cap_truncates_long_chains() {
    let reference = build_reference_tree(&parse_fixture("registry.sol"));
    let full = graft_call_tree(&reference, "Registry", "register", 10).unwrap();
    assert_eq!(full.root.depth(), 6);
    let capped = graft_call_tree(&reference, "Registry", "register", 5).unwrap();
    assert_eq!(capped.root.depth(), 5);
    assert_eq!(
        graft_call_tree(&reference, "Registry", "register", 1)
            .unwrap()
            .node_count(),
        1
    );
}

#[test]
fn token_transfer_cycle() {
    let reference = build_reference_tree(&parse_fixture("collectible.sol"));
    let tree = graft_call_tree(&reference, "Collectible", "transferFrom", 10).unwrap();
    let rows = tree_rows(&tree);
    let cycles: Vec<_> = rows.iter().filter(|r| r.4).collect();
    assert_eq!(cycles.len(), 1, "{rows:?}");
    assert_eq!(cycles[0].2, "transferFrom");
    assert_eq!(cycles[0].0, 5);

    let found = detect_cycles(&reference);
    assert_eq!(found.len(), 1);
    let names: Vec<&str> = found[0].iter().map(|(_, f)| f.as_str()).collect();
    assert_eq!(
        names,
        [
            "isApprovedOrOwner",
            "transferFrom",
            "removeTokenFrom",
            "ownerOf"
        ]
    );
    assert!(to_dot(&tree).contains("style=dashed"));
}

#[test]
fn data_bridge_chain() {
    let reference = build_reference_tree(&parse_fixture("data_bridge.sol"));
    let entry = &reference
        .callees("DataBridge", "transferDataOwnership")
        .unwrap()["transferOwnership"];
    assert_eq!(entry.count, 1);
    let tree = graft_call_tree(&reference, "DataBridge", "transferDataOwnership", 3).unwrap();
    let rows: Vec<_> = tree_rows(&tree).into_iter().map(|r| (r.0, r.2)).collect();
    assert_eq!(
        rows,
        [
            (1, "transferDataOwnership".into()),
            (2, "transferOwnership".into()),
            (3, "_transferOwnership".into())
        ]
    );
}

#[test]
fn cycles_match_oracle_on_fixtures() {
    for file in corpus_files() {
        let reference = build_reference_tree(&parse_file(&file));
        let ours: Vec<_> = detect_cycles(&reference);
        let expected: Vec<_> = oracle_cycles(&reference).into_iter().collect();
        assert_eq!(ours, expected, "{}", file.display());
    }
}

#[test]
fn errors() {
    let reference = build_reference_tree(&parse_fixture("vault.sol"));
    assert_eq!(
        graft_call_tree(&reference, "Vault", "deposit", 0).unwrap_err(),
        CallGraphError::InvalidDepth
    );
    assert!(matches!(
        graft_call_tree(&reference, "Vault", "nope", 3),
        Err(CallGraphError::UnknownFunction { .. })
    ));
}

/// Random reference trees over contracts `C0..C2` and functions `f0..f5`.
fn arb_reftree() -> impl Strategy<Value = RefTree> {
    let callee = (0usize..4, 0usize..6, 1usize..3);
    let function = prop::collection::vec(callee, 0..4);
    prop::collection::vec(prop::collection::vec(function, 1..6), 1..4).prop_map(|contracts| {
        let mut tree = RefTree::default();
        for (ci, functions) in contracts.iter().enumerate() {
            let mut fmap = IndexMap::new();
            for (fi, callees) in functions.iter().enumerate() {
                let mut cmap = IndexMap::new();
                for (offset, &(target, name, count)) in callees.iter().enumerate() {
                    let defining = if target < contracts.len() && name < contracts[target].len() {
                        format!("C{target}")
                    } else {
                        EXTERNAL.to_string()
                    };
                    cmap.entry(format!("f{name}")).or_insert(RefEntry {
                        defining_contract: defining,
                        count,
                        first_offset: 100 - offset * 7,
                    });
                }
                fmap.insert(format!("f{fi}"), cmap);
            }
            tree.contracts.insert(format!("C{ci}"), fmap);
        }
        tree
    })
}

proptest! {
    #[test]
    fn graft_matches_oracle_on_random_trees(tree in arb_reftree(), depth in 1usize..8) {
        for (c, f) in tree.functions() {
            let grafted = graft_call_tree(&tree, c, f, depth).unwrap();
            prop_assert_eq!(tree_rows(&grafted), oracle_tree(&tree, c, f, depth));
        }
    }

    #[test]
    fn cycles_match_oracle_on_random_trees(tree in arb_reftree()) {
        let expected: Vec<_> = oracle_cycles(&tree).into_iter().collect();
        prop_assert_eq!(detect_cycles(&tree), expected);
    }

    #[test]
    fn no_path_repeats_a_node(tree in arb_reftree(), depth in 1usize..8) {
        for (c, f) in tree.functions() {
            let grafted = graft_call_tree(&tree, c, f, depth).unwrap();
            let mut path: Vec<(String, String)> = Vec::new();
            for (d, node) in grafted.root.walk() {
                path.truncate(d - 1);
                let key = (node.contract.clone(), node.function.clone());
                prop_assert_eq!(path.contains(&key), node.cycle);
                if node.cycle {
                    prop_assert!(node.children.is_empty());
                }
                path.push(key);
            }
        }
    }
}
