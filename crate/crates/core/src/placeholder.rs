//! `<AssertPlaceholder{k}>` markers: locating them and filling them back in.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lexer;
use crate::model::{PredictionSet, TestAssertEntry};

pub const PREFIX: &str = "<AssertPlaceholder";

pub fn placeholder(index: u32) -> String {
    format!("{PREFIX}{index}>")
}

/// A placeholder occurrence inside masked source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceholderSpan {
    pub index: u32,
    pub start: usize,
    pub end: usize,
    /// Leading whitespace of the line holding the placeholder.
    pub indent: String,
}

/// All placeholders in `masked`, in source order.
pub fn scan(masked: &str) -> Vec<PlaceholderSpan> {
    let mut spans = Vec::new();
    let mut from = 0;
    while let Some(pos) = masked[from..].find(PREFIX) {
        let start = from + pos;
        let digits_at = start + PREFIX.len();
        let digits = masked[digits_at..]
            .bytes()
            .take_while(u8::is_ascii_digit)
            .count();
        let close = digits_at + digits;
        if digits > 0 && masked.as_bytes().get(close) == Some(&b'>') {
            if let Ok(index) = masked[digits_at..close].parse() {
                let line_start = masked[..start].rfind('\n').map_or(0, |n| n + 1);
                let indent = masked[line_start..start]
                    .chars()
                    .take_while(|c| *c == ' ' || *c == '\t')
                    .collect();
                spans.push(PlaceholderSpan { index, start, end: close + 1, indent });
                from = close + 1;
                continue;
            }
        }
        from = digits_at;
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FillError {
    #[error("masked source has {placeholders} placeholders but {given} statements were supplied")]
    CountMismatch { placeholders: usize, given: usize },
    #[error("no statement supplied for placeholder {0}")]
    Missing(u32),
}

/// Verbatim substitution: each placeholder replaced by exactly its text.
pub fn substitute(masked: &str, texts: &[(u32, &str)]) -> Result<String, FillError> {
    fill_with(masked, texts, |_, text| String::from(text)).map(|(s, _)| s)
}

/// Re-indent continuation lines of `text` to sit under a statement at `indent`.
///
/// Text whose continuation lines already carry `indent` is left alone, so
/// source-extracted statements survive unchanged. Lines that begin inside a
/// string literal are never touched.
pub fn reindent(text: &str, indent: &str) -> String {
    if indent.is_empty() || !text.contains('\n') {
        return String::from(text);
    }
    let strings = lexer::string_spans(text).unwrap_or_default();
    let in_string = |offset: usize| strings.iter().any(|&(s, e)| s < offset && offset < e);
    let mut line_starts = Vec::new();
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            line_starts.push(i + 1);
        }
    }
    let candidates: Vec<usize> = line_starts
        .iter()
        .copied()
        .filter(|&s| !in_string(s))
        .filter(|&s| {
            let line = text[s..].split('\n').next().unwrap_or("");
            !line.trim().is_empty()
        })
        .collect();
    if candidates.iter().all(|&s| text[s..].starts_with(indent)) {
        return String::from(text);
    }
    let mut out = String::with_capacity(text.len() + candidates.len() * indent.len());
    let mut last = 0;
    for s in candidates {
        out.push_str(&text[last..s]);
        out.push_str(indent);
        last = s;
    }
    out.push_str(&text[last..]);
    out
}

/// Placeholder-substituted source plus where each statement landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injected {
    pub source: String,
    /// `(index, start, end)` byte ranges of the inserted statements.
    pub spans: Vec<(u32, usize, usize)>,
}

type Placed = Vec<(u32, usize, usize)>;

fn fill_with(
    masked: &str,
    texts: &[(u32, &str)],
    render: impl Fn(&PlaceholderSpan, &str) -> String,
) -> Result<(String, Placed), FillError> {
    let spans = scan(masked);
    if spans.len() != texts.len() {
        return Err(FillError::CountMismatch { placeholders: spans.len(), given: texts.len() });
    }
    let mut out = String::with_capacity(masked.len());
    let mut placed = Vec::with_capacity(spans.len());
    let mut last = 0;
    for span in &spans {
        let text = texts
            .iter()
            .find(|(i, _)| *i == span.index)
            .map(|(_, t)| *t)
            .ok_or(FillError::Missing(span.index))?;
        out.push_str(&masked[last..span.start]);
        let start = out.len();
        out.push_str(&render(span, text));
        placed.push((span.index, start, out.len()));
        last = span.end;
    }
    out.push_str(&masked[last..]);
    Ok((out, placed))
}

/// Patches predictions into the entry's masked test source.
pub fn inject_asserts(entry: &TestAssertEntry, preds: &PredictionSet) -> Result<Injected, FillError> {
    let texts: Vec<(u32, &str)> = preds
        .predictions
        .iter()
        .map(|p| (p.index, p.text.as_str()))
        .collect();
    let (source, spans) = fill_with(&entry.masked_test_source, &texts, |span, text| {
        reindent(text.trim(), &span.indent)
    })?;
    Ok(Injected { source, spans })
}

/// The original test source, rebuilt from the ground-truth asserts.
pub fn original_test_source(entry: &TestAssertEntry) -> Result<String, FillError> {
    substitute(&entry.masked_test_source, &entry.truth())
}

/// Removes the statement's own indentation from continuation lines, for display.
pub fn dedent_continuation(text: &str, indent: &str) -> String {
    if indent.is_empty() || !text.contains('\n') {
        return String::from(text);
    }
    let strings = lexer::string_spans(text).unwrap_or_default();
    let mut out = String::with_capacity(text.len());
    let mut offset = 0;
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
            let inside = strings.iter().any(|&(s, e)| s < offset && offset < e);
            match line.strip_prefix(indent) {
                Some(rest) if !inside => out.push_str(rest),
                _ => out.push_str(line),
            }
        } else {
            out.push_str(line);
        }
        offset += line.len() + 1;
    }
    out
}
