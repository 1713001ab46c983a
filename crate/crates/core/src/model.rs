//! Records shared by every stage of the pipeline.
//!
//! Field order of the serialized structs is part of the on-disk contract
//! (dataset and results files are line-delimited JSON written in this order).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// How a test spells its asserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Python's `assert` keyword.
    Keyword,
    /// A testing library's `self.assert*` family.
    Library,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Keyword => "keyword",
            Flavor::Library => "library",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One assert statement cut out of a test body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertStatement {
    /// 1-based position in source order.
    pub index: u32,
    /// Exact source text of the whole statement.
    pub text: String,
    /// `"assert"` for the keyword form, else the library method name.
    pub method_kind: String,
    /// Argument source texts; empty for the keyword form.
    pub arg_texts: Vec<String>,
}

impl AssertStatement {
    pub fn is_keyword(&self) -> bool {
        self.method_kind == KEYWORD_KIND
    }
}

/// Method kind recorded for keyword-form asserts.
pub const KEYWORD_KIND: &str = "assert";

/// Entry flags.
pub mod flags {
    /// The test function carries decorators (parametrize and friends).
    pub const DECORATED: &str = "decorated";
    /// At least one assert sits under a loop, conditional or `try`.
    pub const NESTED_ASSERT: &str = "nested-assert";
    /// The prompt payload exceeds the configured character budget.
    pub const OVERSIZE: &str = "oversize";
}

/// A mined test-assert pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestAssertEntry {
    pub id: String,
    pub project: String,
    /// Test file path relative to the project root, `/`-separated.
    pub file_path: String,
    pub class_name: Option<String>,
    pub method_name: String,
    pub flavor: Flavor,
    pub revision: String,
    pub focal_method_source: String,
    pub masked_test_source: String,
    pub globals_source: String,
    pub asserts: Vec<AssertStatement>,
    pub flags: Vec<String>,
}

impl TestAssertEntry {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn is_oversize(&self) -> bool {
        self.has_flag(flags::OVERSIZE)
    }

    pub fn is_multi_assert(&self) -> bool {
        self.asserts.len() > 1
    }

    /// Name of the focal method, read off its `def` line.
    pub fn focal_method_name(&self) -> &str {
        focal_name(&self.focal_method_source)
    }

    /// Size of the prompt payload the entry contributes.
    pub fn payload_chars(&self) -> usize {
        payload_chars(
            &self.focal_method_source,
            &self.globals_source,
            &self.masked_test_source,
        )
    }

    /// Ground-truth texts keyed by placeholder index.
    pub fn truth(&self) -> Vec<(u32, &str)> {
        self.asserts.iter().map(|a| (a.index, a.text.as_str())).collect()
    }
}

pub fn payload_chars(focal: &str, globals: &str, masked: &str) -> usize {
    focal.chars().count() + globals.chars().count() + masked.chars().count()
}

fn focal_name(source: &str) -> &str {
    for line in source.lines() {
        let line = line.trim_start();
        let line = line.strip_prefix("async ").unwrap_or(line);
        if let Some(rest) = line.strip_prefix("def ") {
            let end = rest
                .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            return &rest[..end];
        }
    }
    ""
}

/// One predicted assert.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: u32,
    pub text: String,
}

/// Predictions for all placeholders of one entry in one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub entry_id: String,
    pub round: u32,
    pub predictions: Vec<Prediction>,
    pub raw_response: String,
}

impl PredictionSet {
    pub fn get(&self, index: u32) -> Option<&str> {
        self.predictions
            .iter()
            .find(|p| p.index == index)
            .map(|p| p.text.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Passed,
    Failed,
    Error,
    Timeout,
}

/// Expected/actual detail parsed from a failed run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureDetail {
    /// Placeholder the failure belongs to; 0 when unattributable.
    pub placeholder_index: u32,
    pub expected: String,
    pub actual: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub entry_id: String,
    pub verdict: Verdict,
    pub failures: Vec<FailureDetail>,
    pub raw_output: String,
    pub duration_s: f64,
}

impl ExecutionReport {
    pub fn error(entry_id: &str, message: impl Into<String>) -> Self {
        ExecutionReport {
            entry_id: entry_id.into(),
            verdict: Verdict::Error,
            failures: Vec::new(),
            raw_output: message.into(),
            duration_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// Ordered chat history of one entry's dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entry_id: String,
    pub turns: Vec<Turn>,
}

impl Transcript {
    pub fn new(entry_id: impl Into<String>) -> Self {
        Transcript {
            entry_id: entry_id.into(),
            turns: Vec::new(),
        }
    }

    /// Number of user turns sent so far; the replay key of the next send.
    pub fn user_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.role == Role::User).count()
    }

    pub fn push(&mut self, role: Role, text: impl Into<String>) {
        self.turns.push(Turn {
            role,
            text: text.into(),
        });
    }

    /// Roles alternate user/assistant after an optional leading system turn.
    pub fn is_well_formed(&self) -> bool {
        let mut turns = self.turns.iter().peekable();
        if turns.peek().map(|t| t.role) == Some(Role::System) {
            turns.next();
        }
        turns.enumerate().all(|(i, t)| {
            let want = if i % 2 == 0 { Role::User } else { Role::Assistant };
            t.role == want
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Greeting,
    Query,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub phase: Phase,
    pub text: String,
    pub entry_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    Unparseable,
    Oversize,
    BackendError,
    RunnerError,
    /// The project has no other test to serve as the one-shot sample.
    NoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub predictions: PredictionSet,
    pub report: ExecutionReport,
}

/// Everything produced while generating asserts for one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub entry_id: String,
    pub status: RecordStatus,
    pub rounds: Vec<Round>,
    pub final_predictions: Option<PredictionSet>,
    pub sample_id: Option<String>,
    pub error: Option<String>,
    pub transcript: Transcript,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_name_reads_def_line() {
        assert_eq!(focal_name("    @staticmethod\n    def parse(x):\n        pass"), "parse");
        assert_eq!(focal_name("async def fetch_all():\n    pass"), "fetch_all");
        assert_eq!(focal_name(""), "");
    }

    #[test]
    fn transcript_alternation() {
        let mut t = Transcript::new("e");
        assert!(t.is_well_formed());
        t.push(Role::System, "s");
        t.push(Role::User, "u");
        t.push(Role::Assistant, "a");
        assert!(t.is_well_formed());
        assert_eq!(t.user_turns(), 1);
        t.push(Role::Assistant, "a");
        assert!(!t.is_well_formed());
    }

    #[test]
    fn status_serializes_kebab_case() {
        let s = serde_json::to_string(&RecordStatus::BackendError).unwrap();
        assert_eq!(s, "\"backend-error\"");
    }
}
