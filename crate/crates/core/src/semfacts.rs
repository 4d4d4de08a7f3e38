//! Semantic facts about one target function: contract globals, identifiers
//! with roles, the bodies of functions it reaches, and its call tree.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::callgraph::{
    detect_cycles, graft_call_tree, linearized_bases, CallGraphError, CallTree, RefTree,
};
use crate::parser::{referenced_identifiers, FunctionDecl, SourceUnit, Visibility};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalVar {
    pub name: String,
    pub type_name: String,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierRole {
    Parameter,
    LocalVariable,
    Modifier,
    FunctionName,
    StateVariableRef,
}

impl IdentifierRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            IdentifierRole::Parameter => "parameter",
            IdentifierRole::LocalVariable => "local_variable",
            IdentifierRole::Modifier => "modifier",
            IdentifierRole::FunctionName => "function_name",
            IdentifierRole::StateVariableRef => "state_variable_ref",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifierFact {
    pub name: String,
    pub role: IdentifierRole,
    pub type_name: Option<String>,
}

impl IdentifierFact {
    fn new(name: &str, role: IdentifierRole, type_name: Option<&str>) -> Self {
        IdentifierFact {
            name: name.to_string(),
            role,
            type_name: type_name.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerFunction {
    pub contract: String,
    pub name: String,
    pub body_text: String,
    /// Distance from the target in the call tree.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticFacts {
    pub contract_name: String,
    pub function_name: String,
    pub global_vars: Vec<GlobalVar>,
    pub identifiers: Vec<IdentifierFact>,
    pub inner_functions: Vec<InnerFunction>,
    pub call_tree: CallTree,
    pub cycles: Vec<Vec<(String, String)>>,
}

/// Identifier facts of one declaration, in the order: function name,
/// parameters, locals, modifiers. Duplicate `(name, role)` pairs are dropped.
pub fn extract_identifiers(f: &FunctionDecl) -> Vec<IdentifierFact> {
    let mut out = vec![IdentifierFact::new(
        f.display_name(),
        IdentifierRole::FunctionName,
        None,
    )];
    out.extend(
        f.params
            .iter()
            .filter(|p| !p.name.is_empty())
            .map(|p| IdentifierFact::new(&p.name, IdentifierRole::Parameter, Some(&p.type_name))),
    );
    out.extend(
        f.local_vars.iter().map(|v| {
            IdentifierFact::new(&v.name, IdentifierRole::LocalVariable, Some(&v.type_name))
        }),
    );
    out.extend(
        f.modifiers
            .iter()
            .map(|m| IdentifierFact::new(m, IdentifierRole::Modifier, None)),
    );

    let mut seen = HashSet::new();
    out.retain(|fact| seen.insert((fact.name.clone(), fact.role)));
    out
}

/// State variables visible in `contract`: its own, then inherited ones in
/// base order. A name declared closer to the contract shadows later ones.
/// Undeclared visibility is reported as `internal`, the language default.
pub fn global_vars(unit: &SourceUnit, contract: &str) -> Vec<GlobalVar> {
    let mut chain = vec![contract];
    chain.extend(linearized_bases(unit, contract));
    let mut seen = HashSet::new();
    chain
        .into_iter()
        .filter_map(|name| unit.contract(name))
        .flat_map(|c| c.state_vars.iter())
        .filter(|v| seen.insert(v.name.as_str()))
        .map(|v| GlobalVar {
            name: v.name.clone(),
            type_name: v.type_name.clone(),
            visibility: match v.visibility {
                Visibility::Default => Visibility::Internal,
                other => other,
            },
        })
        .collect()
}

/// Gathers everything the prompt needs about `contract.function`.
///
/// Overloads of the target are merged: identifiers of every overload are
/// listed, matching the call tree which binds by name.
pub fn collect_facts(
    unit: &SourceUnit,
    reference: &RefTree,
    contract: &str,
    function: &str,
    max_depth: usize,
) -> Result<SemanticFacts, CallGraphError> {
    let unknown = || CallGraphError::UnknownFunction {
        contract: contract.to_string(),
        function: function.to_string(),
    };
    let decl = unit.contract(contract).ok_or_else(unknown)?;
    let overloads: Vec<&FunctionDecl> = decl
        .functions
        .iter()
        .filter(|f| f.display_name() == function)
        .collect();
    if overloads.is_empty() {
        return Err(unknown());
    }
    let call_tree = graft_call_tree(reference, contract, function, max_depth)?;
    let globals = global_vars(unit, contract);

    let mut identifiers: Vec<IdentifierFact> = Vec::new();
    for f in &overloads {
        for fact in extract_identifiers(f) {
            if !identifiers
                .iter()
                .any(|x| x.name == fact.name && x.role == fact.role)
            {
                identifiers.push(fact);
            }
        }
    }
    let shadowed: HashSet<&str> = overloads
        .iter()
        .flat_map(|f| f.params.iter().chain(&f.local_vars))
        .map(|p| p.name.as_str())
        .collect();
    let types: HashMap<&str, &str> = globals
        .iter()
        .map(|g| (g.name.as_str(), g.type_name.as_str()))
        .collect();
    let mut referenced = HashSet::new();
    for f in &overloads {
        for word in referenced_identifiers(&f.body_text) {
            if let Some(ty) = types.get(word.as_str()) {
                if !shadowed.contains(word.as_str()) && referenced.insert(word.clone()) {
                    identifiers.push(IdentifierFact::new(
                        &word,
                        IdentifierRole::StateVariableRef,
                        Some(ty),
                    ));
                }
            }
        }
    }

    let inner_functions = inner_functions(unit, &call_tree);
    let on_tree: HashSet<(String, String)> = call_tree
        .root
        .walk()
        .into_iter()
        .map(|(_, n)| (n.contract.clone(), n.function.clone()))
        .collect();
    let cycles = detect_cycles(reference)
        .into_iter()
        .filter(|c| c.iter().any(|node| on_tree.contains(node)))
        .collect();

    Ok(SemanticFacts {
        contract_name: contract.to_string(),
        function_name: function.to_string(),
        global_vars: globals,
        identifiers,
        inner_functions,
        call_tree,
        cycles,
    })
}

/// Breadth-first over the call tree, so entries come out ordered by depth
/// and, within a depth, by call-site order. Each function is listed once.
fn inner_functions(unit: &SourceUnit, tree: &CallTree) -> Vec<InnerFunction> {
    let root = (tree.root.contract.as_str(), tree.root.function.as_str());
    let mut seen = HashSet::from([root]);
    let mut out = Vec::new();
    let mut queue: VecDeque<_> = tree.root.children.iter().map(|c| (1usize, c)).collect();
    while let Some((depth, node)) = queue.pop_front() {
        queue.extend(node.children.iter().map(|c| (depth + 1, c)));
        if node.is_external()
            || node.cycle
            || !seen.insert((node.contract.as_str(), node.function.as_str()))
        {
            continue;
        }
        let Some(contract) = unit.contract(&node.contract) else {
            continue;
        };
        let body: Vec<&str> = contract
            .functions
            .iter()
            .filter(|f| f.display_name() == node.function)
            .map(|f| f.body_text.as_str())
            .collect();
        if body.is_empty() {
            continue;
        }
        out.push(InnerFunction {
            contract: node.contract.clone(),
            name: node.function.clone(),
            body_text: body.join("\n"),
            depth,
        });
    }
    out
}
