//! Lexical scans over function-body tokens.

use super::lexer::{Token, TokenKind};
use super::{collapse_ws, param_from_tokens, split_top_level, CallSite, Param};

/// Calls that are language builtins rather than user functions.
const BUILTINS: &[&str] = &[
    "require",
    "assert",
    "revert",
    "keccak256",
    "sha3",
    "sha256",
    "ripemd160",
    "ecrecover",
    "selfdestruct",
    "suicide",
    "addmod",
    "mulmod",
    "blockhash",
    "gasleft",
    "type",
];

/// Keywords that may directly precede `(` without being calls.
const KEYWORDS: &[&str] = &[
    "if",
    "for",
    "while",
    "return",
    "returns",
    "catch",
    "try",
    "function",
    "mapping",
    "do",
    "else",
    "emit",
    "new",
    "delete",
    "unchecked",
    "assembly",
];

/// Receivers whose members are environment builtins (`msg.sender.transfer`,
/// `abi.encodePacked`, ...).
const BUILTIN_ROOTS: &[&str] = &["msg", "block", "tx", "abi"];

pub(crate) fn is_elementary_type(word: &str) -> bool {
    let sized = |prefix: &str| {
        word.strip_prefix(prefix)
            .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit() || c == 'x'))
    };
    matches!(
        word,
        "address" | "bool" | "string" | "byte" | "payable" | "var"
    ) || sized("uint")
        || sized("int")
        || sized("bytes")
        || sized("ufixed")
        || sized("fixed")
}

fn matching_close(src: &str, toks: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text(src) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn matching_open(src: &str, toks: &[Token], close: usize) -> Option<usize> {
    let mut depth = 0i32;
    for i in (0..=close).rev() {
        let t = toks[i];
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text(src) {
            ")" | "]" | "}" => depth += 1,
            "(" | "[" | "{" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Skips an inline assembly block starting at `i` (the `assembly` keyword).
fn skip_assembly(src: &str, toks: &[Token], mut i: usize) -> usize {
    i += 1;
    while let Some(t) = toks.get(i) {
        if t.is_punct(src, '{') {
            return matching_close(src, toks, i).map_or(toks.len(), |c| c + 1);
        }
        if t.is_punct(src, '(') {
            i = matching_close(src, toks, i).map_or(toks.len(), |c| c + 1);
            continue;
        }
        i += 1;
    }
    i
}

/// The receiver expression before the `.` at `dot`, as raw source text.
fn receiver_before(src: &str, toks: &[Token], dot: usize) -> Option<String> {
    let mut first = None;
    let mut k = dot;
    while k > 0 {
        let t = toks[k - 1];
        if t.kind == TokenKind::Ident {
            first = Some(k - 1);
            k -= 1;
        } else if t.is_punct(src, ')') || t.is_punct(src, ']') {
            let open = matching_open(src, toks, k - 1)?;
            first = Some(open);
            k = open;
            if k > 0 && toks[k - 1].kind == TokenKind::Ident {
                first = Some(k - 1);
                k -= 1;
            }
        } else {
            break;
        }
        if k > 0 && toks[k - 1].is_punct(src, '.') {
            k -= 1;
        } else {
            break;
        }
    }
    let first = first?;
    Some(collapse_ws(&src[toks[first].start..toks[dot - 1].end]))
}

fn arg_count(src: &str, toks: &[Token], open: usize) -> usize {
    let Some(close) = matching_close(src, toks, open) else {
        return 0;
    };
    let inner = &toks[open + 1..close];
    if inner.is_empty() {
        0
    } else {
        split_top_level(src, inner).len()
    }
}

/// Finds every `name(` (or `name{opts}(`) in a body that names a user
/// function, in source order.
pub(crate) fn call_sites(src: &str, toks: &[Token]) -> Vec<CallSite> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        if t.kind != TokenKind::Ident {
            i += 1;
            continue;
        }
        let word = t.text(src);
        if word == "assembly" {
            i = skip_assembly(src, toks, i);
            continue;
        }

        let mut open = i + 1;
        // call options: f{value: v, gas: g}(...)
        if toks.get(open).is_some_and(|n| n.is_punct(src, '{'))
            && toks
                .get(open + 1)
                .is_some_and(|n| n.kind == TokenKind::Ident)
            && toks.get(open + 2).is_some_and(|n| n.is_punct(src, ':'))
        {
            if let Some(close) = matching_close(src, toks, open) {
                open = close + 1;
            }
        }
        if !toks.get(open).is_some_and(|n| n.is_punct(src, '(')) {
            i += 1;
            continue;
        }

        let prev = i.checked_sub(1).map(|p| toks[p]);
        let prev_word = prev
            .filter(|p| p.kind == TokenKind::Ident)
            .map(|p| p.text(src));
        if matches!(prev_word, Some("emit" | "new" | "revert" | "function")) {
            i += 1;
            continue;
        }

        let receiver = if prev.is_some_and(|p| p.is_punct(src, '.')) {
            receiver_before(src, toks, i - 1)
        } else {
            None
        };
        let builtin = match &receiver {
            Some(r) => {
                let root = r
                    .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
                    .next()
                    .unwrap_or("");
                BUILTIN_ROOTS.contains(&root)
            }
            None => {
                BUILTINS.contains(&word) || KEYWORDS.contains(&word) || is_elementary_type(word)
            }
        };
        if !builtin {
            out.push(CallSite {
                callee_name: word.to_string(),
                receiver,
                arg_count: arg_count(src, toks, open),
                offset: t.start,
            });
        }
        i += 1;
    }
    out
}

const STATEMENT_WORDS: &[&str] = &[
    "return",
    "emit",
    "if",
    "else",
    "while",
    "for",
    "do",
    "delete",
    "require",
    "revert",
    "assembly",
    "unchecked",
    "break",
    "continue",
    "throw",
    "try",
    "catch",
    "new",
    "assert",
    "_",
    "mapping",
];

const LOCATIONS: &[&str] = &["memory", "storage", "calldata"];

/// Matches `Type [location] name` followed by `=` or `;` starting at `s`.
fn declaration_at(src: &str, toks: &[Token], s: usize) -> Option<(Param, usize)> {
    let first = toks.get(s)?;
    if first.kind != TokenKind::Ident || STATEMENT_WORDS.contains(&first.text(src)) {
        return None;
    }
    let mut i = s + 1;
    while toks.get(i).is_some_and(|t| t.is_punct(src, '.'))
        && toks.get(i + 1).is_some_and(|t| t.kind == TokenKind::Ident)
    {
        i += 2;
    }
    while toks.get(i).is_some_and(|t| t.is_punct(src, '[')) {
        i = matching_close(src, toks, i)? + 1;
    }
    if toks.get(i).is_some_and(|t| t.is_ident(src, "payable")) {
        i += 1;
    }
    if toks
        .get(i)
        .is_some_and(|t| t.kind == TokenKind::Ident && LOCATIONS.contains(&t.text(src)))
    {
        i += 1;
    }
    let name = toks.get(i).filter(|t| t.kind == TokenKind::Ident)?;
    let after = toks.get(i + 1)?;
    if !(after.is_punct(src, '=') || after.is_punct(src, ';')) {
        return None;
    }
    // `a = =` cannot happen, but `a == b;` can
    if after.is_punct(src, '=') && toks.get(i + 2).is_some_and(|t| t.is_punct(src, '=')) {
        return None;
    }
    Some((param_from_tokens(src, &toks[s..=i]), i + 1))
        .filter(|(p, _)| !p.name.is_empty() && name.text(src) == p.name)
}

/// `(T a, , U b) = ...` tuple declarations.
fn tuple_declaration_at(src: &str, toks: &[Token], s: usize) -> Vec<Param> {
    let Some(close) = matching_close(src, toks, s) else {
        return Vec::new();
    };
    if !toks.get(close + 1).is_some_and(|t| t.is_punct(src, '=')) {
        return Vec::new();
    }
    let parts = split_top_level(src, &toks[s + 1..close]);
    let mut out = Vec::new();
    for part in parts.into_iter().filter(|p| !p.is_empty()) {
        if part.len() < 2 {
            // plain assignment to existing variables
            return Vec::new();
        }
        let p = param_from_tokens(src, part);
        if p.name.is_empty() {
            return Vec::new();
        }
        out.push(p);
    }
    out
}

/// Local variable declarations found at statement starts.
pub(crate) fn local_vars(src: &str, toks: &[Token]) -> Vec<Param> {
    let mut out: Vec<Param> = Vec::new();
    let push = |p: Param, out: &mut Vec<Param>| {
        if !out.iter().any(|q| q.name == p.name) {
            out.push(p);
        }
    };
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        if t.is_ident(src, "assembly") {
            i = skip_assembly(src, toks, i);
            continue;
        }
        let at_statement_start = i == 0 || {
            let p = toks[i - 1];
            p.is_punct(src, '{')
                || p.is_punct(src, '}')
                || p.is_punct(src, ';')
                || (p.is_punct(src, '(') && i >= 2 && toks[i - 2].is_ident(src, "for"))
        };
        if at_statement_start {
            if t.is_punct(src, '(') {
                for p in tuple_declaration_at(src, toks, i) {
                    push(p, &mut out);
                }
            } else if let Some((p, _)) = declaration_at(src, toks, i) {
                push(p, &mut out);
            }
        }
        i += 1;
    }
    out
}
