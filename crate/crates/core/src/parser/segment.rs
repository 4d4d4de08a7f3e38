//! Splits a `.sol` file into its top-level contract, library and interface
//! declarations by brace matching.
//!
//! This is a character-level scanner that does not share code with the
//! tokenizer, so its spans can be checked against a full parse.

use thiserror::Error;

use super::{line_col, Span};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("{line}:{column}: `{name}` is never closed")]
    Unclosed {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: unmatched `}}`")]
    Unmatched { line: usize, column: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContractSlice<'a> {
    pub name: &'a str,
    pub span: Span,
    pub text: &'a str,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Code,
    LineComment,
    BlockComment,
    Str(u8),
}

struct Pending {
    start: usize,
    name: Option<(usize, usize)>,
    opened: bool,
}

/// Returns the top-level declarations of `text` in source order.
pub fn segment_contracts(text: &str) -> Result<Vec<ContractSlice<'_>>, SegmentError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut state = State::Code;
    let mut depth = 0usize;
    let mut pending: Option<Pending> = None;
    let mut last_word: Option<(usize, usize)> = None;
    let mut i = 0;

    while i < bytes.len() {
        let b = bytes[i];
        match state {
            State::LineComment => {
                if b == b'\n' {
                    state = State::Code;
                }
                i += 1;
            }
            State::BlockComment => {
                if b == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    state = State::Code;
                    i += 2;
                } else {
                    i += 1;
                }
            }
            State::Str(q) => {
                if b == b'\\' {
                    i += 2;
                } else {
                    if b == q || b == b'\n' {
                        state = State::Code;
                    }
                    i += 1;
                }
            }
            State::Code => {
                if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
                    state = State::LineComment;
                    i += 2;
                } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
                    state = State::BlockComment;
                    i += 2;
                } else if b == b'"' || b == b'\'' {
                    state = State::Str(b);
                    i += 1;
                } else if b.is_ascii_alphabetic() || b == b'_' || b == b'$' {
                    let start = i;
                    while i < bytes.len()
                        && (bytes[i].is_ascii_alphanumeric()
                            || bytes[i] == b'_'
                            || bytes[i] == b'$')
                    {
                        i += 1;
                    }
                    if depth == 0 {
                        let word = &text[start..i];
                        match &mut pending {
                            Some(p) if p.name.is_none() => p.name = Some((start, i)),
                            Some(_) => {}
                            None if matches!(word, "contract" | "library" | "interface") => {
                                let from = match last_word {
                                    Some((s, e)) if &text[s..e] == "abstract" => s,
                                    _ => start,
                                };
                                pending = Some(Pending {
                                    start: from,
                                    name: None,
                                    opened: false,
                                });
                            }
                            None => {}
                        }
                        last_word = Some((start, i));
                    }
                } else if b == b'{' {
                    if depth == 0 {
                        if let Some(p) = &mut pending {
                            p.opened = true;
                        }
                    }
                    depth += 1;
                    i += 1;
                } else if b == b'}' {
                    if depth == 0 {
                        let (line, column) = line_col(text, i);
                        return Err(SegmentError::Unmatched { line, column });
                    }
                    depth -= 1;
                    i += 1;
                    if depth == 0 {
                        if let Some(p) = pending.take_if(|p| p.opened) {
                            let (ns, ne) = p.name.unwrap_or((p.start, p.start));
                            out.push(ContractSlice {
                                name: &text[ns..ne],
                                span: Span {
                                    start: p.start,
                                    end: i,
                                },
                                text: &text[p.start..i],
                            });
                        }
                    }
                } else {
                    if b == b';' && depth == 0 {
                        last_word = None;
                    }
                    i += 1;
                }
            }
        }
    }

    if depth > 0 || pending.is_some() {
        let p = pending.unwrap_or(Pending {
            start: text.len(),
            name: None,
            opened: false,
        });
        let name = p
            .name
            .map_or("<anonymous>", |(s, e)| &text[s..e])
            .to_string();
        let (line, column) = line_col(text, p.start);
        return Err(SegmentError::Unclosed { name, line, column });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file() {
        assert!(segment_contracts("").unwrap().is_empty());
        assert!(
            segment_contracts("// just a comment\npragma solidity ^0.8.0;")
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn two_contracts_in_order() {
        let src = "pragma solidity ^0.8.0;\ncontract A { uint x; }\n\nabstract contract B is A { function f() public {} }\n";
        let slices = segment_contracts(src).unwrap();
        let names: Vec<_> = slices.iter().map(|s| s.name).collect();
        assert_eq!(names, vec!["A", "B"]);
        assert_eq!(slices[0].text, "contract A { uint x; }");
        assert!(slices[1].text.starts_with("abstract contract B"));
    }

    #[test]
    fn braces_in_strings_and_comments() {
        let src = "contract A {\n  function f() public { string memory s = \"}\"; // }\n /* } */ }\n}\ncontract B {}";
        let slices = segment_contracts(src).unwrap();
        assert_eq!(slices.len(), 2);
        assert!(slices[0].text.ends_with("*/ }\n}"));
    }

    #[test]
    fn slices_reassemble_input() {
        let src = "// header\ncontract A {}\nstruct S { uint a; }\nlibrary L { }\n// tail\n";
        let slices = segment_contracts(src).unwrap();
        let mut rebuilt = String::new();
        let mut cursor = 0;
        for s in &slices {
            rebuilt.push_str(&src[cursor..s.span.start]);
            rebuilt.push_str(s.text);
            cursor = s.span.end;
        }
        rebuilt.push_str(&src[cursor..]);
        assert_eq!(rebuilt, src);
        assert_eq!(slices.len(), 2);
    }

    #[test]
    fn unclosed() {
        let err = segment_contracts("contract A {\n function f() {").unwrap_err();
        assert!(
            matches!(err, SegmentError::Unclosed { ref name, line: 1, column: 1 } if name == "A")
        );
        assert!(matches!(
            segment_contracts("}"),
            Err(SegmentError::Unmatched { .. })
        ));
    }
}
