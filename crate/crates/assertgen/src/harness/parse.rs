//! Expected/actual extraction from pytest output and from the shim's JSON report.

use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

use assertgen_core::lexer::{self, TokenKind};
use assertgen_core::model::FailureDetail;

/// A failure before attribution to a placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawFailure {
    /// Line in the patched test file the failure points at.
    pub line: Option<usize>,
    pub expected: String,
    pub actual: String,
    pub message: String,
}

impl RawFailure {
    pub fn attribute(self, ranges: &[(u32, usize, usize)]) -> FailureDetail {
        FailureDetail {
            placeholder_index: attribute(self.line, ranges),
            expected: self.expected,
            actual: self.actual,
            message: self.message,
        }
    }
}

/// Placeholder whose line range holds `line`; 0 for a line outside every
/// range; the first placeholder when no line is known.
pub fn attribute(line: Option<usize>, ranges: &[(u32, usize, usize)]) -> u32 {
    match line {
        Some(l) => ranges
            .iter()
            .find(|(_, start, end)| (*start..=*end).contains(&l))
            .map_or(0, |(i, _, _)| *i),
        None => ranges.iter().map(|(i, _, _)| *i).min().unwrap_or(0),
    }
}

static SECTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^_{3,} .+ _{3,}$").unwrap());
static LOCATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\S[^:]*\.py):(\d+): ").unwrap());
static DIFFER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z][a-z]+ differ: ").unwrap());

/// unittest messages as (pattern, actual group, expected group).
static UNITTEST: LazyLock<Vec<(Regex, usize, usize)>> = LazyLock::new(|| {
    [
        (r"^(.+) not found in (.+)$", 1, 2),
        (r"^(.+) unexpectedly found in (.+)$", 1, 2),
        (r"^(.+) is not an instance of (.+)$", 1, 2),
        (r"^(.+) is an instance of (.+)$", 1, 2),
        (r"^(.+) not (?:less|greater) than (?:or equal to )?(.+)$", 1, 2),
        (r"^(.+) is not (true|false)$", 1, 2),
    ]
    .into_iter()
    .map(|(p, a, e)| (Regex::new(p).unwrap(), a, e))
    .collect()
});

const COMPARISONS: &[&str] = &["==", "!=", "<", ">", "<=", ">=", "in", "is"];

/// Splits `left OP right` at the first top-level comparison; the right side
/// stops at a top-level `:` (unittest appends ` : msg`).
pub fn split_comparison(expr: &str) -> Option<(String, String)> {
    let toks = lexer::code_tokens(expr).ok()?;
    let mut depth = 0i32;
    let mut at = None;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Op && t.kind != TokenKind::Name {
            continue;
        }
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            op if depth == 0 && COMPARISONS.contains(&op) => {
                at = Some(i);
                break;
            }
            _ => {}
        }
    }
    let at = at?;
    let mut left_end = toks[at].start;
    let mut right_start = toks[at].end();
    if toks[at].text == "in" && at > 0 && toks[at - 1].text == "not" {
        left_end = toks[at - 1].start;
    }
    if toks[at].text == "is" && toks.get(at + 1).is_some_and(|t| t.text == "not") {
        right_start = toks[at + 1].end();
    }
    let mut right_end = expr.len();
    let mut depth = 0i32;
    for t in &toks[at + 1..] {
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ":" if depth == 0 && t.kind == TokenKind::Op => {
                right_end = t.start;
                break;
            }
            _ => {}
        }
    }
    let left = expr[..left_end].trim();
    let right = expr[right_start..right_end].trim();
    (!left.is_empty() && !right.is_empty()).then(|| (left.to_string(), right.to_string()))
}

fn unittest_values(msg: &str) -> Option<(String, String)> {
    let msg = DIFFER.find(msg).map_or(msg, |m| &msg[m.end()..]);
    if msg == "unexpectedly None" {
        return Some(("None".into(), String::new()));
    }
    for (re, a, e) in UNITTEST.iter() {
        if let Some(c) = re.captures(msg) {
            return Some((c[*a].to_string(), c[*e].to_string()));
        }
    }
    split_comparison(msg)
}

/// First failure in text-mode pytest output. `test_file` picks the
/// traceback entry used for the line number.
pub fn parse_text(raw: &str, test_file: Option<&str>) -> RawFailure {
    let lines: Vec<&str> = raw.lines().collect();
    let start = lines.iter().position(|l| SECTION.is_match(l)).map_or(0, |i| i + 1);
    let end = lines[start..]
        .iter()
        .position(|l| SECTION.is_match(l) || l.starts_with("====="))
        .map_or(lines.len(), |i| start + i);
    let section = &lines[start..end];

    let mut line = None;
    let mut heads: Vec<&str> = Vec::new();
    for l in section {
        if let Some(c) = LOCATION.captures(l) {
            let file = c.get(1).unwrap().as_str();
            if test_file.is_none_or(|t| t == file) {
                line = c[2].parse().ok();
            }
            continue;
        }
        if let Some(rest) = l.strip_prefix('E').filter(|r| r.is_empty() || r.starts_with(' ')) {
            let content = rest.strip_prefix("   ").unwrap_or(rest.trim_start());
            if !content.is_empty() && !content.starts_with(char::is_whitespace) {
                heads.push(content);
            }
        }
    }

    let Some(first) = heads.first() else {
        let message = lines
            .iter()
            .find(|l| l.contains("Error") || l.contains("error"))
            .or_else(|| lines.iter().find(|l| !l.trim().is_empty()))
            .map_or("", |l| l.trim());
        return RawFailure { line, message: message.to_string(), ..Default::default() };
    };
    let mut failure = RawFailure { line, message: first.to_string(), ..Default::default() };
    let rewritten: Vec<&str> = heads.iter().filter_map(|h| h.strip_prefix("assert ")).collect();
    let values = if rewritten.is_empty() {
        heads
            .iter()
            .find_map(|h| h.strip_prefix("AssertionError: ").and_then(unittest_values))
    } else {
        rewritten.into_iter().find_map(split_comparison)
    };
    if let Some((actual, expected)) = values {
        failure.actual = actual;
        failure.expected = expected;
    }
    failure
}

/// Text-mode failures with no placeholder attribution.
pub fn parse_failure(raw_output: &str) -> Vec<FailureDetail> {
    vec![parse_text(raw_output, None).attribute(&[])]
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShimFailure {
    #[serde(default)]
    pub line: Option<usize>,
    #[serde(default)]
    pub expected: String,
    #[serde(default)]
    pub actual: String,
    #[serde(default)]
    pub message: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShimReport {
    pub test_id: String,
    pub outcome: String,
    #[serde(default)]
    pub failures: Vec<ShimFailure>,
}

/// First failure of `node_id` in the shim's report, fields copied verbatim.
pub fn parse_structured(json: &str, node_id: &str) -> Option<RawFailure> {
    let reports: Vec<ShimReport> = serde_json::from_str(json).ok()?;
    let report = reports
        .iter()
        .find(|r| r.test_id == node_id || r.test_id.ends_with(node_id))
        .or_else(|| reports.iter().find(|r| r.outcome != "passed"))?;
    let f = report.failures.first()?;
    Some(RawFailure {
        line: f.line,
        expected: f.expected.clone(),
        actual: f.actual.clone(),
        message: f.message.clone(),
    })
}
