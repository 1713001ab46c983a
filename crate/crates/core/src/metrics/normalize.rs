use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::lexer::{self, TokenKind};

/// Token sequence of an assert statement with layout and quoting erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub tokens: Vec<String>,
    /// Set when the text did not lex and whitespace-split words were used instead.
    pub fallback: bool,
}

/// Lexes `text`, drops comments and whitespace, and rewrites string literals
/// to single quotes where that needs no escaping.
pub fn normalize(text: &str) -> Normalized {
    match lexer::code_tokens(text) {
        Ok(toks) => Normalized {
            tokens: toks
                .iter()
                .map(|t| match t.kind {
                    TokenKind::Str => normalize_string(t.text),
                    _ => t.text.to_string(),
                })
                .collect(),
            fallback: false,
        },
        Err(_) => Normalized {
            tokens: text.split_whitespace().map(String::from).collect(),
            fallback: true,
        },
    }
}

fn normalize_string(lit: &str) -> String {
    let quote_at = lit.find(['\'', '"']).unwrap_or(0);
    let prefix: String = lit[..quote_at]
        .chars()
        .filter(|c| !matches!(c, 'u' | 'U'))
        .flat_map(char::to_lowercase)
        .collect();
    let rest = &lit[quote_at..];
    let (q, body) = if rest.len() >= 6 && (rest.starts_with("\"\"\"") || rest.starts_with("'''")) {
        (&rest[..3], &rest[3..rest.len() - 3])
    } else if rest.len() >= 2 {
        (&rest[..1], &rest[1..rest.len() - 1])
    } else {
        return lit.to_string();
    };
    if q.starts_with('\'') || body.contains('\'') || body.contains('\\') {
        return format!("{prefix}{rest}");
    }
    let single = if q.len() == 3 { "'''" } else { "'" };
    format!("{prefix}{single}{body}{single}")
}
