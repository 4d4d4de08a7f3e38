//! Byte-offset tokenizer for the Solidity surface syntax.
//!
//! Comments are kept as tokens so that doc comments can be attached to the
//! declarations that follow them. Strings are lexed as single tokens, which is
//! what keeps braces inside literals from upsetting brace matching.

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident,
    Number,
    Str,
    Punct,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }

    pub fn is_punct(&self, src: &str, c: char) -> bool {
        self.kind == TokenKind::Punct && src[self.start..].starts_with(c)
    }

    pub fn is_ident(&self, src: &str, word: &str) -> bool {
        self.kind == TokenKind::Ident && self.text(src) == word
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

/// Tokenizes `src`, returning every token including comments.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut chars = src.char_indices().peekable();

    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }

        if c == '/' && bytes.get(start + 1) == Some(&b'/') {
            let end = src[start..].find('\n').map_or(src.len(), |n| start + n);
            let end = if src[..end].ends_with('\r') {
                end - 1
            } else {
                end
            };
            tokens.push(Token {
                kind: TokenKind::LineComment,
                start,
                end,
            });
            while chars.peek().is_some_and(|&(i, _)| i < end) {
                chars.next();
            }
            continue;
        }

        if c == '/' && bytes.get(start + 1) == Some(&b'*') {
            let Some(close) = src[start + 2..].find("*/") else {
                return Err(ParseError::at(src, start, "unterminated block comment"));
            };
            let end = start + 2 + close + 2;
            tokens.push(Token {
                kind: TokenKind::BlockComment,
                start,
                end,
            });
            while chars.peek().is_some_and(|&(i, _)| i < end) {
                chars.next();
            }
            continue;
        }

        if c == '"' || c == '\'' {
            chars.next();
            let mut end = None;
            while let Some((i, ch)) = chars.next() {
                if ch == '\\' {
                    chars.next();
                } else if ch == c {
                    end = Some(i + 1);
                    break;
                } else if ch == '\n' {
                    break;
                }
            }
            let Some(end) = end else {
                return Err(ParseError::at(src, start, "unterminated string literal"));
            };
            tokens.push(Token {
                kind: TokenKind::Str,
                start,
                end,
            });
            continue;
        }

        if is_ident_start(c) {
            let mut end = start;
            while let Some(&(i, ch)) = chars.peek() {
                if !is_ident_continue(ch) {
                    break;
                }
                end = i + ch.len_utf8();
                chars.next();
            }
            tokens.push(Token {
                kind: TokenKind::Ident,
                start,
                end,
            });
            continue;
        }

        if c.is_ascii_digit() {
            let mut end = start;
            let mut prev = c;
            while let Some(&(i, ch)) = chars.peek() {
                // exponent sign: 1e-3
                let signed_exp = (ch == '-' || ch == '+') && (prev == 'e' || prev == 'E');
                let fraction = ch == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit());
                if !(ch.is_ascii_alphanumeric() || ch == '_' || signed_exp || fraction) {
                    break;
                }
                end = i + ch.len_utf8();
                prev = ch;
                chars.next();
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                start,
                end,
            });
            continue;
        }

        chars.next();
        tokens.push(Token {
            kind: TokenKind::Punct,
            start,
            end: start + c.len_utf8(),
        });
    }

    Ok(tokens)
}
