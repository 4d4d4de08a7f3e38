//! Recursive-descent parser for the subset of Solidity needed to build call
//! trees: contract-level declarations, function headers and verbatim bodies.
//!
//! Statement-level syntax is never parsed. Function bodies are kept as source
//! slices and scanned lexically for call sites and local declarations, so
//! unknown constructs inside a body never fail the parse.

mod body;
mod comments;
mod lexer;
mod segment;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use lexer::{Token, TokenKind};

pub use comments::clean_comment;
pub use segment::{segment_contracts, ContractSlice, SegmentError};

/// A parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(src: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = line_col(src, offset);
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// 1-based line and column (in characters) of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

/// Half-open byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn slice<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractKind {
    Contract,
    Library,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Internal,
    Private,
    External,
    Default,
}

impl Visibility {
    fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "public" => Visibility::Public,
            "internal" => Visibility::Internal,
            "private" => Visibility::Private,
            "external" => Visibility::External,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
            Visibility::External => "external",
            Visibility::Default => "default",
        }
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mutability {
    Pure,
    View,
    Payable,
    Nonpayable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub pragma: Option<String>,
    pub contracts: Vec<ContractDecl>,
}

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<&ContractDecl> {
        self.contracts.iter().find(|c| c.name == name)
    }

    /// All overloads of `function` (matched by display name) in `contract`.
    pub fn functions_named<'a>(
        &'a self,
        contract: &str,
        function: &'a str,
    ) -> impl Iterator<Item = &'a FunctionDecl> + 'a {
        self.contract(contract)
            .into_iter()
            .flat_map(move |c| c.functions_named(function))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractDecl {
    pub name: String,
    pub kind: ContractKind,
    pub bases: Vec<String>,
    pub state_vars: Vec<StateVarDecl>,
    pub functions: Vec<FunctionDecl>,
    pub source_span: Span,
}

impl ContractDecl {
    pub fn functions_named<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = &'a FunctionDecl> + 'a {
        self.functions
            .iter()
            .filter(move |f| f.display_name() == name)
    }

    pub fn defines(&self, name: &str) -> bool {
        self.functions_named(name).next().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVarDecl {
    pub name: String,
    pub type_name: String,
    pub visibility: Visibility,
    pub source_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    /// Empty for constructors, fallback and receive functions.
    pub name: String,
    pub kind: FunctionKind,
    pub params: Vec<Param>,
    pub modifiers: Vec<String>,
    pub visibility: Visibility,
    pub mutability: Mutability,
    /// The full declaration, from the leading keyword to the closing brace
    /// (or semicolon for bodiless declarations).
    pub body_text: String,
    pub has_body: bool,
    pub doc_comment: Option<String>,
    pub call_sites: Vec<CallSite>,
    pub local_vars: Vec<Param>,
    pub source_span: Span,
}

impl FunctionDecl {
    /// The name used to key call trees: the declared name, or the kind for
    /// unnamed special functions.
    pub fn display_name(&self) -> &str {
        if !self.name.is_empty() {
            return &self.name;
        }
        match self.kind {
            FunctionKind::Constructor => "constructor",
            FunctionKind::Receive => "receive",
            FunctionKind::Fallback | FunctionKind::Function => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub callee_name: String,
    pub receiver: Option<String>,
    pub arg_count: usize,
    pub offset: usize,
}

/// Parses Solidity source text into a [`SourceUnit`].
pub fn parse_source(text: &str, path: &str) -> Result<SourceUnit, ParseError> {
    let all = lexer::tokenize(text)?;
    let (comments, code): (Vec<Token>, Vec<Token>) = all.into_iter().partition(|t| t.is_comment());
    let mut parser = Parser {
        src: text,
        toks: code,
        comments,
        pos: 0,
        type_names: HashSet::new(),
    };
    let mut unit = parser.source_unit(path)?;

    // Calls whose callee is a declared type (contract cast, struct literal,
    // event or error) carry no intra-contract control flow.
    for c in &unit.contracts {
        parser.type_names.insert(c.name.clone());
    }
    for contract in &mut unit.contracts {
        for f in &mut contract.functions {
            f.call_sites
                .retain(|cs| cs.receiver.is_some() || !parser.type_names.contains(&cs.callee_name));
        }
    }
    Ok(unit)
}

/// Identifiers used in `text` outside comments and strings, excluding member
/// names after a `.`, in first-occurrence order.
pub fn referenced_identifiers(text: &str) -> Vec<String> {
    let Ok(toks) = lexer::tokenize(text) else {
        return Vec::new();
    };
    let code: Vec<Token> = toks.into_iter().filter(|t| !t.is_comment()).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, t) in code.iter().enumerate() {
        if t.kind != TokenKind::Ident || (i > 0 && code[i - 1].is_punct(text, '.')) {
            continue;
        }
        let word = t.text(text);
        if seen.insert(word) {
            out.push(word.to_string());
        }
    }
    out
}

/// Returns every function with a nonempty leading doc comment, paired with
/// the cleaned comment text.
pub fn extract_method_comment_pairs(
    unit: &SourceUnit,
) -> Vec<(&ContractDecl, &FunctionDecl, String)> {
    unit.contracts
        .iter()
        .flat_map(|c| c.functions.iter().map(move |f| (c, f)))
        .filter_map(|(c, f)| {
            let comment = f.doc_comment.as_deref()?.trim();
            (!comment.is_empty()).then(|| (c, f, comment.to_string()))
        })
        .collect()
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    comments: Vec<Token>,
    pos: usize,
    type_names: HashSet<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Token> {
        self.toks.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<Token> {
        self.toks.get(self.pos + n).copied()
    }

    fn text(&self, t: Token) -> &'a str {
        t.text(self.src)
    }

    fn eof_error(&self, message: &str) -> ParseError {
        ParseError::at(
            self.src,
            self.src.len(),
            format!("unexpected end of input: {message}"),
        )
    }

    fn expect_ident(&mut self, what: &str) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(ParseError::at(
                self.src,
                t.start,
                format!("expected {what}, found `{}`", self.text(t)),
            )),
            None => Err(self.eof_error(&format!("expected {what}"))),
        }
    }

    fn ident_text(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let t = self.expect_ident(what)?;
        Ok(t.text(self.src))
    }

    fn expect_punct(&mut self, c: char) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if t.is_punct(self.src, c) => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(ParseError::at(
                self.src,
                t.start,
                format!("expected `{c}`, found `{}`", self.text(t)),
            )),
            None => Err(self.eof_error(&format!("expected `{c}`"))),
        }
    }

    /// Index of the token closing the group opened at `open_idx`.
    fn matching_close(&self, open_idx: usize) -> Result<usize, ParseError> {
        let open = self.toks[open_idx];
        let mut depth = 0usize;
        for (i, t) in self.toks.iter().enumerate().skip(open_idx) {
            if t.kind != TokenKind::Punct {
                continue;
            }
            match self.text(*t) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        let expected = match self.text(open) {
                            "(" => ")",
                            "[" => "]",
                            _ => "}",
                        };
                        if self.text(*t) != expected {
                            return Err(ParseError::at(
                                self.src,
                                t.start,
                                format!("mismatched `{}`, expected `{expected}`", self.text(*t)),
                            ));
                        }
                        return Ok(i);
                    }
                }
                _ => {}
            }
        }
        let (line, column) = line_col(self.src, open.start);
        Err(self.eof_error(&format!(
            "`{}` opened at {line}:{column} is never closed",
            self.text(open)
        )))
    }

    /// Skips one contract- or file-level item: up to a `;` at depth zero, or
    /// through the first top-level brace block.
    fn skip_item(&mut self) -> Result<(), ParseError> {
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Punct {
                match self.text(t) {
                    ";" => {
                        self.pos += 1;
                        return Ok(());
                    }
                    "(" | "[" => {
                        self.pos = self.matching_close(self.pos)? + 1;
                        continue;
                    }
                    "{" => {
                        self.pos = self.matching_close(self.pos)? + 1;
                        return Ok(());
                    }
                    "}" | ")" | "]" => {
                        return Err(ParseError::at(
                            self.src,
                            t.start,
                            format!("unbalanced `{}`", self.text(t)),
                        ));
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        Err(self.eof_error("unterminated declaration"))
    }

    fn source_unit(&mut self, path: &str) -> Result<SourceUnit, ParseError> {
        let mut unit = SourceUnit {
            path: path.to_string(),
            pragma: None,
            contracts: Vec::new(),
        };
        let mut names = HashSet::new();

        while let Some(t) = self.peek() {
            match self.text(t) {
                "pragma" => {
                    let start = self.pos;
                    self.skip_item()?;
                    let is_solidity = self
                        .toks
                        .get(start + 1)
                        .is_some_and(|n| n.is_ident(self.src, "solidity"));
                    if is_solidity && unit.pragma.is_none() {
                        let from = self.toks[start + 1].end;
                        let to = self.toks[self.pos - 1].start;
                        unit.pragma = Some(collapse_ws(&self.src[from..to]));
                    }
                }
                "abstract" | "contract" | "library" | "interface"
                    if t.kind == TokenKind::Ident && self.starts_contract() =>
                {
                    let contract = self.contract()?;
                    if !names.insert(contract.name.clone()) {
                        return Err(ParseError::at(
                            self.src,
                            contract.source_span.start,
                            format!("duplicate contract name `{}`", contract.name),
                        ));
                    }
                    unit.contracts.push(contract);
                }
                "struct" | "enum" | "event" | "error" if t.kind == TokenKind::Ident => {
                    self.note_type_name();
                    self.skip_item()?;
                }
                // imports, using-directives, free functions, file-level
                // constants and user-defined value types
                _ => self.skip_item()?,
            }
        }
        Ok(unit)
    }

    fn starts_contract(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        let (kw, name) = if self.text(t) == "abstract" {
            (self.peek_at(1), self.peek_at(2))
        } else {
            (Some(t), self.peek_at(1))
        };
        kw.is_some_and(|k| matches!(self.text(k), "contract" | "library" | "interface"))
            && name.is_some_and(|n| n.kind == TokenKind::Ident)
    }

    fn note_type_name(&mut self) {
        if let Some(n) = self.peek_at(1).filter(|n| n.kind == TokenKind::Ident) {
            self.type_names.insert(self.text(n).to_string());
        }
    }

    fn contract(&mut self) -> Result<ContractDecl, ParseError> {
        let first = self.peek().expect("caller checked");
        if self.text(first) == "abstract" {
            self.pos += 1;
        }
        let kw = self.expect_ident("contract keyword")?;
        let kind = match self.text(kw) {
            "library" => ContractKind::Library,
            "interface" => ContractKind::Interface,
            _ => ContractKind::Contract,
        };
        let name = self.ident_text("contract name")?.to_string();

        let mut bases = Vec::new();
        if self.peek().is_some_and(|t| t.is_ident(self.src, "is")) {
            self.pos += 1;
            loop {
                let mut base = self.ident_text("base contract name")?.to_string();
                while self.peek().is_some_and(|t| t.is_punct(self.src, '.')) {
                    self.pos += 1;
                    base.push('.');
                    base.push_str(self.ident_text("base contract name")?);
                }
                bases.push(base);
                if self.peek().is_some_and(|t| t.is_punct(self.src, '(')) {
                    self.pos = self.matching_close(self.pos)? + 1;
                }
                if self.peek().is_some_and(|t| t.is_punct(self.src, ',')) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }

        let open = self.expect_punct('{')?;
        let mut contract = ContractDecl {
            name,
            kind,
            bases,
            state_vars: Vec::new(),
            functions: Vec::new(),
            source_span: Span {
                start: first.start,
                end: first.start,
            },
        };

        let mut boundary = open.end;
        loop {
            let Some(t) = self.peek() else {
                let (line, column) = line_col(self.src, open.start);
                return Err(self.eof_error(&format!(
                    "contract `{}` opened at {line}:{column} is never closed",
                    contract.name
                )));
            };
            if t.is_punct(self.src, '}') {
                self.pos += 1;
                contract.source_span.end = t.end;
                return Ok(contract);
            }

            let word = if t.kind == TokenKind::Ident {
                self.text(t)
            } else {
                ""
            };
            let next_is_paren = self.peek_at(1).is_some_and(|n| n.is_punct(self.src, '('));
            match word {
                "function" => {
                    let f = self.function(FunctionKind::Function, boundary)?;
                    contract.functions.push(f);
                }
                "constructor" => {
                    let f = self.function(FunctionKind::Constructor, boundary)?;
                    contract.functions.push(f);
                }
                "fallback" if next_is_paren => {
                    let f = self.function(FunctionKind::Fallback, boundary)?;
                    contract.functions.push(f);
                }
                "receive" if next_is_paren => {
                    let f = self.function(FunctionKind::Receive, boundary)?;
                    contract.functions.push(f);
                }
                "struct" | "enum" | "event" | "error" => {
                    self.note_type_name();
                    self.skip_item()?;
                }
                "modifier" | "using" => self.skip_item()?,
                _ if t.kind == TokenKind::Punct && self.text(t) == ";" => self.pos += 1,
                _ => {
                    if let Some(var) = self.state_var()? {
                        contract.state_vars.push(var);
                    }
                }
            }
            boundary = self.toks[self.pos - 1].end;
        }
    }

    fn state_var(&mut self) -> Result<Option<StateVarDecl>, ParseError> {
        let first = self.pos;
        self.skip_item()?;
        let last = self.pos - 1;
        if !self.toks[last].is_punct(self.src, ';') {
            // a braced construct we do not model
            return Ok(None);
        }

        // declaration part stops at the initializer
        let mut decl_end = last;
        let mut depth = 0i32;
        for i in first..last {
            let t = self.toks[i];
            if t.kind != TokenKind::Punct {
                continue;
            }
            match self.text(t) {
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                "=" if depth == 0 => {
                    decl_end = i;
                    break;
                }
                _ => {}
            }
        }

        let mut visibility = Visibility::Default;
        let mut type_end = None;
        let mut name = None;
        let mut i = first;
        while i < decl_end {
            let t = self.toks[i];
            if t.is_punct(self.src, '(') || t.is_punct(self.src, '[') {
                i = self.matching_close(i)? + 1;
                continue;
            }
            let word = self.text(t);
            if t.kind == TokenKind::Ident {
                if let Some(v) = Visibility::from_keyword(word) {
                    visibility = v;
                    type_end.get_or_insert(i);
                } else if matches!(word, "constant" | "immutable" | "override" | "transient") {
                    type_end.get_or_insert(i);
                } else if i > first && !self.toks[i - 1].is_punct(self.src, '.') {
                    name = Some(t);
                }
            }
            i += 1;
        }

        let Some(name) = name else { return Ok(None) };
        let type_end = type_end.unwrap_or(decl_end).min(self.index_of(name));
        let type_name = self.render_tokens(first, type_end);
        if type_name.is_empty() {
            return Ok(None);
        }
        Ok(Some(StateVarDecl {
            name: self.text(name).to_string(),
            type_name,
            visibility,
            source_span: Span {
                start: self.toks[first].start,
                end: self.toks[last].end,
            },
        }))
    }

    fn index_of(&self, t: Token) -> usize {
        self.toks.partition_point(|x| x.start < t.start)
    }

    /// Renders tokens `[from, to)` with a single space between adjacent words.
    fn render_tokens(&self, from: usize, to: usize) -> String {
        render_tokens(self.src, &self.toks[from..to])
    }

    fn function(
        &mut self,
        kind: FunctionKind,
        boundary: usize,
    ) -> Result<FunctionDecl, ParseError> {
        let kw = self.peek().expect("caller checked");
        self.pos += 1;

        let mut kind = kind;
        let mut name = String::new();
        if kind == FunctionKind::Function {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Ident => {
                    name = self.text(t).to_string();
                    self.pos += 1;
                }
                // pre-0.6 unnamed fallback: function () payable { }
                Some(t) if t.is_punct(self.src, '(') => kind = FunctionKind::Fallback,
                Some(t) => {
                    return Err(ParseError::at(
                        self.src,
                        t.start,
                        format!("expected function name, found `{}`", self.text(t)),
                    ));
                }
                None => return Err(self.eof_error("expected function name")),
            }
        }

        let open = self.pos;
        self.expect_punct('(')?;
        let close = self.matching_close(open)?;
        let params = self.params(open + 1, close);
        self.pos = close + 1;

        let mut visibility = Visibility::Default;
        let mut mutability = Mutability::Nonpayable;
        let mut modifiers = Vec::new();
        let (body_open, end_tok) = loop {
            let Some(t) = self.peek() else {
                return Err(self.eof_error("unterminated function header"));
            };
            if t.is_punct(self.src, '{') {
                let open_idx = self.pos;
                let close = self.matching_close(open_idx)?;
                self.pos = close + 1;
                break (Some(open_idx), close);
            }
            if t.is_punct(self.src, ';') {
                self.pos += 1;
                break (None, self.pos - 1);
            }
            if t.kind == TokenKind::Punct {
                let c = self.text(t);
                if c == "(" || c == "[" {
                    self.pos = self.matching_close(self.pos)? + 1;
                    continue;
                }
                return Err(ParseError::at(
                    self.src,
                    t.start,
                    format!("unexpected `{c}` in function header"),
                ));
            }
            let word = self.text(t);
            self.pos += 1;
            if let Some(v) = Visibility::from_keyword(word) {
                visibility = v;
                continue;
            }
            match word {
                "pure" => mutability = Mutability::Pure,
                "view" | "constant" => mutability = Mutability::View,
                "payable" => mutability = Mutability::Payable,
                "virtual" => {}
                "override" | "returns" => {
                    if self.peek().is_some_and(|n| n.is_punct(self.src, '(')) {
                        self.pos = self.matching_close(self.pos)? + 1;
                    }
                }
                _ if t.kind == TokenKind::Ident => {
                    let mut modifier = word.to_string();
                    while self.peek().is_some_and(|n| n.is_punct(self.src, '.')) {
                        self.pos += 1;
                        modifier.push('.');
                        modifier.push_str(self.ident_text("modifier name")?);
                    }
                    if self.peek().is_some_and(|n| n.is_punct(self.src, '(')) {
                        self.pos = self.matching_close(self.pos)? + 1;
                    }
                    if !modifiers.contains(&modifier) {
                        modifiers.push(modifier);
                    }
                }
                _ => {}
            }
        };

        let span = Span {
            start: kw.start,
            end: self.toks[end_tok].end,
        };
        let (call_sites, local_vars) = match body_open {
            Some(open_idx) => {
                let body = &self.toks[open_idx + 1..end_tok];
                (
                    body::call_sites(self.src, body),
                    body::local_vars(self.src, body),
                )
            }
            None => (Vec::new(), Vec::new()),
        };

        Ok(FunctionDecl {
            name,
            kind,
            params,
            modifiers,
            visibility,
            mutability,
            body_text: span.slice(self.src).to_string(),
            has_body: body_open.is_some(),
            doc_comment: self.doc_comment(boundary, kw.start),
            call_sites,
            local_vars,
            source_span: span,
        })
    }

    fn params(&self, from: usize, to: usize) -> Vec<Param> {
        split_top_level(self.src, &self.toks[from..to])
            .into_iter()
            .filter(|p| !p.is_empty())
            .map(|p| param_from_tokens(self.src, p))
            .collect()
    }

    /// The contiguous block of doc-style comments that ends right before
    /// `decl_start`, with nothing but whitespace in between.
    fn doc_comment(&self, boundary: usize, decl_start: usize) -> Option<String> {
        let candidates: Vec<Token> = self
            .comments
            .iter()
            .filter(|c| c.start >= boundary && c.end <= decl_start)
            .copied()
            .collect();

        let mut block: Vec<Token> = Vec::new();
        let mut next_start = decl_start;
        for c in candidates.iter().rev() {
            let text = c.text(self.src);
            let doc_style = c.kind == TokenKind::LineComment || text.starts_with("/**");
            if !doc_style || !starts_own_line(self.src, c.start) {
                break;
            }
            let gap = &self.src[c.end..next_start];
            // blank lines end a comment block, but may separate it from the
            // declaration it documents
            if !block.is_empty() && gap.matches('\n').count() > 1 {
                break;
            }
            block.push(*c);
            next_start = c.start;
        }
        if block.is_empty() {
            return None;
        }
        block.reverse();
        let raw: Vec<&str> = block.iter().map(|c| c.text(self.src)).collect();
        let cleaned = clean_comment(&raw.join("\n"));
        (!cleaned.is_empty()).then_some(cleaned)
    }
}

fn starts_own_line(src: &str, offset: usize) -> bool {
    let line_start = src[..offset].rfind('\n').map_or(0, |i| i + 1);
    src[line_start..offset].trim().is_empty()
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_wordlike(t: &Token) -> bool {
    matches!(
        t.kind,
        TokenKind::Ident | TokenKind::Number | TokenKind::Str
    )
}

pub(crate) fn render_tokens(src: &str, toks: &[Token]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Token> = None;
    for t in toks {
        if prev.is_some_and(|p| is_wordlike(p) && is_wordlike(t)) {
            out.push(' ');
        }
        out.push_str(t.text(src));
        prev = Some(t);
    }
    out
}

/// Splits a token run on commas that are not nested in brackets.
pub(crate) fn split_top_level<'t>(src: &str, toks: &'t [Token]) -> Vec<&'t [Token]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text(src) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "," if depth == 0 => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < toks.len() || !parts.is_empty() {
        parts.push(&toks[start..]);
    }
    parts
}

const LOCATIONS: [&str; 4] = ["memory", "storage", "calldata", "indexed"];

/// Interprets `T [location] [name]`; unnamed parameters get an empty name.
pub(crate) fn param_from_tokens(src: &str, toks: &[Token]) -> Param {
    let last = toks[toks.len() - 1];
    let named = toks.len() >= 2
        && last.kind == TokenKind::Ident
        && !LOCATIONS.contains(&last.text(src))
        && last.text(src) != "payable"
        && !toks[toks.len() - 2].is_punct(src, '.');
    let type_toks = if named { &toks[..toks.len() - 1] } else { toks };
    let type_toks: Vec<Token> = type_toks
        .iter()
        .filter(|t| !(t.kind == TokenKind::Ident && LOCATIONS.contains(&t.text(src))))
        .copied()
        .collect();
    Param {
        name: if named {
            last.text(src).to_string()
        } else {
            String::new()
        },
        type_name: render_tokens(src, &type_toks),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA_BRIDGE: &str = r#"pragma solidity ^0.4.24;

contract Ownable {
    address public owner;

    modifier onlyOwner() {
        require(msg.sender == owner);
        _;
    }

    function transferOwnership(address _newOwner) public onlyOwner {
        _transferOwnership(_newOwner);
    }

    function _transferOwnership(address _newOwner) internal {
        require(_newOwner != address(0));
        owner = _newOwner;
    }
}

contract DataBridge is Ownable {
    Ownable data;

    /**
     * @dev Transfer ownership of data contract to _addr.
     * @param _addr address.
     */
    function transferDataOwnership(address _addr) onlyOwner public {
        data.transferOwnership(_addr);
    }
}
"#;

    #[test]
    fn minimal_contract() {
        let unit = parse_source("contract A { function f() public {} }", "a.sol").unwrap();
        assert_eq!(unit.contracts.len(), 1);
        let f = &unit.contracts[0].functions[0];
        assert_eq!(f.name, "f");
        assert_eq!(f.visibility, Visibility::Public);
        assert!(f.call_sites.is_empty());
    }

    #[test]
    fn data_bridge_call_site() {
        let unit = parse_source(DATA_BRIDGE, "bridge.sol").unwrap();
        assert_eq!(unit.pragma.as_deref(), Some("^0.4.24"));
        let bridge = unit.contract("DataBridge").unwrap();
        assert_eq!(bridge.bases, vec!["Ownable"]);
        let f = &bridge.functions[0];
        assert_eq!(f.name, "transferDataOwnership");
        assert_eq!(f.modifiers, vec!["onlyOwner"]);
        assert_eq!(
            f.params,
            vec![Param {
                name: "_addr".into(),
                type_name: "address".into()
            }]
        );
        assert_eq!(f.call_sites.len(), 1);
        let cs = &f.call_sites[0];
        assert_eq!(cs.callee_name, "transferOwnership");
        assert_eq!(cs.receiver.as_deref(), Some("data"));
        assert_eq!(cs.arg_count, 1);
        assert_eq!(&DATA_BRIDGE[cs.offset..cs.offset + 17], "transferOwnership");
    }

    #[test]
    fn builtins_and_casts_are_not_calls() {
        let unit = parse_source(DATA_BRIDGE, "bridge.sol").unwrap();
        let ownable = unit.contract("Ownable").unwrap();
        let inner = ownable
            .functions
            .iter()
            .find(|f| f.name == "_transferOwnership")
            .unwrap();
        assert!(inner.call_sites.is_empty(), "{:?}", inner.call_sites);
    }

    #[test]
    fn state_vars() {
        let src = "contract A { uint x; mapping(address => uint256) public balances; \
                   address constant OWNER = address(0); uint[] private list; }";
        let unit = parse_source(src, "a.sol").unwrap();
        let vars: Vec<_> = unit.contracts[0]
            .state_vars
            .iter()
            .map(|v| (v.name.as_str(), v.type_name.as_str(), v.visibility))
            .collect();
        assert_eq!(
            vars,
            vec![
                ("x", "uint", Visibility::Default),
                ("balances", "mapping(address=>uint256)", Visibility::Public),
                ("OWNER", "address", Visibility::Default),
                ("list", "uint[]", Visibility::Private),
            ]
        );
    }

    #[test]
    fn special_functions() {
        let src = "contract A { constructor(uint a) public { init(a); } \
                   function () external payable { } \
                   receive() external payable {} fallback() external {} function init(uint) internal {} }";
        let unit = parse_source(src, "a.sol").unwrap();
        let names: Vec<_> = unit.contracts[0]
            .functions
            .iter()
            .map(|f| (f.kind, f.display_name()))
            .collect();
        assert_eq!(
            names,
            vec![
                (FunctionKind::Constructor, "constructor"),
                (FunctionKind::Fallback, "fallback"),
                (FunctionKind::Receive, "receive"),
                (FunctionKind::Fallback, "fallback"),
                (FunctionKind::Function, "init"),
            ]
        );
        assert_eq!(unit.contracts[0].functions[0].name, "");
        assert_eq!(
            unit.contracts[0].functions[4].params[0],
            Param {
                name: String::new(),
                type_name: "uint".into()
            }
        );
    }

    #[test]
    fn imports_and_using_are_skipped() {
        let src = r#"
            // SPDX-License-Identifier: MIT
            pragma solidity >=0.6.0 <0.9.0;
            import "./Ownable.sol";
            import {A as B} from "x.sol";
            struct Pair { uint a; uint b; }
            interface IToken { function transfer(address to, uint v) external returns (bool); }
            library SafeMath { function add(uint a, uint b) internal pure returns (uint) { return a + b; } }
            abstract contract Base is IToken { using SafeMath for uint; }
        "#;
        let unit = parse_source(src, "x.sol").unwrap();
        let names: Vec<_> = unit
            .contracts
            .iter()
            .map(|c| (c.name.as_str(), c.kind))
            .collect();
        assert_eq!(
            names,
            vec![
                ("IToken", ContractKind::Interface),
                ("SafeMath", ContractKind::Library),
                ("Base", ContractKind::Contract),
            ]
        );
        assert!(!unit.contracts[0].functions[0].has_body);
        assert_eq!(unit.contracts[1].functions[0].mutability, Mutability::Pure);
    }

    #[test]
    fn unbalanced_braces_report_position() {
        let err =
            parse_source("contract A {\n  function f() public {\n    g();\n", "a.sol").unwrap_err();
        assert!(err.message.contains("never closed"), "{err}");
        let err = parse_source("contract A { }\n}", "a.sol").unwrap_err();
        assert_eq!((err.line, err.column), (2, 1));
    }

    #[test]
    fn body_text_matches_span() {
        let unit = parse_source(DATA_BRIDGE, "bridge.sol").unwrap();
        for c in &unit.contracts {
            assert_eq!(
                &DATA_BRIDGE[c.source_span.start..c.source_span.start + 8],
                "contract"
            );
            for f in &c.functions {
                assert_eq!(f.source_span.slice(DATA_BRIDGE), f.body_text);
                assert!(f.body_text.starts_with("function"));
                assert!(f.body_text.ends_with('}'));
            }
        }
    }

    #[test]
    fn doc_comment_styles() {
        let src = r#"contract A {
    uint x; // trailing note, not a doc comment
    function a() public {}

    /// Triple slash
    /// continues here.
    function b() public {}

    // Plain line comment
    function c() public {}

    /* plain block is ignored */
    function d() public {}

    /**
     * Multi line
     * block comment.
     */

    function e() public {}

    // separated by a blank line

    /// only this part
    function f() public {}
}"#;
        let unit = parse_source(src, "a.sol").unwrap();
        let docs: Vec<_> = unit.contracts[0]
            .functions
            .iter()
            .map(|f| f.doc_comment.clone())
            .collect();
        assert_eq!(
            docs,
            vec![
                None,
                Some("Triple slash continues here.".into()),
                Some("Plain line comment".into()),
                None,
                Some("Multi line block comment.".into()),
                Some("only this part".into()),
            ]
        );
    }

    #[test]
    fn method_comment_pairs_only_documented() {
        let unit = parse_source(DATA_BRIDGE, "bridge.sol").unwrap();
        let pairs = extract_method_comment_pairs(&unit);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].1.name, "transferDataOwnership");
        assert_eq!(
            pairs[0].2,
            "@dev Transfer ownership of data contract to _addr. @param _addr address."
        );
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            parse_source(DATA_BRIDGE, "p").unwrap(),
            parse_source(DATA_BRIDGE, "p").unwrap()
        );
    }
}
