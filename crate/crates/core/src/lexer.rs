//! A small Python tokenizer.
//!
//! Good enough for comparing assert statements token by token and for
//! locating string literals; it does not track INDENT/DEDENT.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Number,
    Str,
    Op,
    Comment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub start: usize,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_name(&self, name: &str) -> bool {
        self.kind == TokenKind::Name && self.text == name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("unterminated string literal at byte {0}")]
    UnterminatedString(usize),
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
];

fn is_prefix_char(c: char) -> bool {
    matches!(c, 'r' | 'R' | 'b' | 'B' | 'u' | 'U' | 'f' | 'F')
}

/// Tokenize `src`, comments included.
pub fn tokenize(src: &str) -> Result<Vec<Token<'_>>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap_or('\0');
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '\\' && matches!(bytes.get(i + 1), Some(b'\n') | Some(b'\r')) {
            i += 1;
            continue;
        }
        let start = i;
        if c == '#' {
            let end = src[i..].find('\n').map_or(src.len(), |n| i + n);
            let end = if end > i && bytes[end - 1] == b'\r' { end - 1 } else { end };
            tokens.push(Token { kind: TokenKind::Comment, text: &src[start..end], start });
            i = end;
            continue;
        }
        if c == '\'' || c == '"' {
            let end = scan_string(src, i)?;
            tokens.push(Token { kind: TokenKind::Str, text: &src[start..end], start });
            i = end;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            for ch in src[i..].chars() {
                if ch.is_alphanumeric() || ch == '_' {
                    j += ch.len_utf8();
                } else {
                    break;
                }
            }
            let ident = &src[i..j];
            if ident.len() <= 2
                && ident.chars().all(is_prefix_char)
                && matches!(bytes.get(j), Some(b'\'') | Some(b'"'))
            {
                let end = scan_string(src, j)?;
                tokens.push(Token { kind: TokenKind::Str, text: &src[start..end], start });
                i = end;
            } else {
                tokens.push(Token { kind: TokenKind::Name, text: ident, start });
                i = j;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let mut j = i;
            while j < src.len() {
                let b = bytes[j];
                if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
                    j += 1;
                    if matches!(b, b'e' | b'E') && matches!(bytes.get(j), Some(b'+') | Some(b'-')) {
                        j += 1;
                    }
                } else {
                    break;
                }
            }
            tokens.push(Token { kind: TokenKind::Number, text: &src[i..j], start });
            i = j;
            continue;
        }
        let len = OPERATORS
            .iter()
            .find(|op| src[i..].starts_with(*op))
            .map_or(c.len_utf8(), |op| op.len());
        tokens.push(Token { kind: TokenKind::Op, text: &src[i..i + len], start });
        i += len;
    }
    Ok(tokens)
}

/// Returns the end offset of the string literal whose opening quote is at `quote_at`.
fn scan_string(src: &str, quote_at: usize) -> Result<usize, LexError> {
    let bytes = src.as_bytes();
    let q = bytes[quote_at];
    let triple = bytes.get(quote_at + 1) == Some(&q) && bytes.get(quote_at + 2) == Some(&q);
    let mut i = quote_at + if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' {
            i += 2;
            continue;
        }
        if triple {
            if b == q && bytes.get(i + 1) == Some(&q) && bytes.get(i + 2) == Some(&q) {
                return Ok(i + 3);
            }
        } else if b == q {
            return Ok(i + 1);
        } else if b == b'\n' {
            break;
        }
        i += 1;
    }
    Err(LexError::UnterminatedString(quote_at))
}

/// Significant tokens only (comments dropped).
pub fn code_tokens(src: &str) -> Result<Vec<Token<'_>>, LexError> {
    let mut toks = tokenize(src)?;
    toks.retain(|t| t.kind != TokenKind::Comment);
    Ok(toks)
}

/// Byte ranges covered by string literals, or `None` if `src` does not lex.
pub fn string_spans(src: &str) -> Option<Vec<(usize, usize)>> {
    let toks = tokenize(src).ok()?;
    Some(
        toks.iter()
            .filter(|t| t.kind == TokenKind::Str)
            .map(|t| (t.start, t.end()))
            .collect(),
    )
}

/// Net count of unclosed brackets; tolerant of text that does not lex.
pub fn open_brackets(src: &str) -> i32 {
    let count = |toks: &[Token<'_>]| {
        toks.iter().fold(0, |d, t| match (t.kind, t.text) {
            (TokenKind::Op, "(" | "[" | "{") => d + 1,
            (TokenKind::Op, ")" | "]" | "}") => d - 1,
            _ => d,
        })
    };
    match tokenize(src) {
        Ok(toks) => count(&toks),
        Err(_) => src.chars().fold(0, |d, c| match c {
            '(' | '[' | '{' => d + 1,
            ')' | ']' | '}' => d - 1,
            _ => d,
        }),
    }
}

/// Splits `toks` at top-level commas (bracket depth zero).
pub fn split_top_level<'t, 'a>(toks: &'t [Token<'a>], sep: &str) -> Vec<&'t [Token<'a>]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut from = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Op {
            continue;
        }
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if s == sep && depth == 0 => {
                parts.push(&toks[from..i]);
                from = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&toks[from..]);
    parts
}

/// Whether the token run has balanced brackets and never dips below zero.
pub fn is_balanced(toks: &[Token<'_>]) -> bool {
    let mut depth = 0i32;
    for t in toks {
        if t.kind == TokenKind::Op {
            match t.text {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth < 0 {
                        return false;
                    }
                }
                _ => {}
            }
        }
    }
    depth == 0
}
