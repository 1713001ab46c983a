//! The greeting / query / feedback prompts and reply parsing.

mod cot;
mod response;
mod template;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use cot::{describe, generate_cot, CotMode};
pub use response::{format_assertion_list, parse_predictions, MalformedResponse, SECTION_TITLE};
pub use template::{Template, TemplateError};

use crate::model::{FailureDetail, Flavor, Phase, PredictionSet, PromptMessage, TestAssertEntry};
use crate::placeholder::{self, placeholder};
use crate::similarity::name_similarity;

pub const DEFAULT_GREETING: &str = include_str!("../../templates/greeting.txt");
pub const DEFAULT_QUERY: &str = include_str!("../../templates/query.txt");
pub const DEFAULT_FEEDBACK: &str = include_str!("../../templates/feedback.txt");
pub const DEFAULT_REMINDER: &str = include_str!("../../templates/reminder.txt");

const GREETING_SLOTS: &[&str] =
    &["framework", "sample_focal", "sample_test", "sample_cot", "sample_assertions"];
const QUERY_SLOTS: &[&str] = &["focal", "globals_section", "test", "count", "placeholders", "cot"];
const FEEDBACK_SLOTS: &[&str] = &["failures"];
const REMINDER_SLOTS: &[&str] = &["count"];

const LIBRARY_INSTRUCTION: &str = "Testing framework: the unit test inherits a testing-library \
test case, so every assertion must use the library's assertion methods (the self.assert* family, \
e.g. self.assertEqual) rather than the bare assert keyword.";
const KEYWORD_INSTRUCTION: &str = "Testing framework: the unit test uses Python's built-in assert \
keyword, so every assertion must be a plain assert statement rather than a testing library method.";

/// The four prompt templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub greeting: Template,
    pub query: Template,
    pub feedback: Template,
    pub reminder: Template,
}

impl TemplateSet {
    pub fn from_sources(
        greeting: &str,
        query: &str,
        feedback: &str,
        reminder: &str,
    ) -> Result<Self, TemplateError> {
        Ok(TemplateSet {
            greeting: Template::parse("greeting", greeting, GREETING_SLOTS)?,
            query: Template::parse("query", query, QUERY_SLOTS)?,
            feedback: Template::parse("feedback", feedback, FEEDBACK_SLOTS)?,
            reminder: Template::parse("reminder", reminder, REMINDER_SLOTS)?,
        })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::from_sources(DEFAULT_GREETING, DEFAULT_QUERY, DEFAULT_FEEDBACK, DEFAULT_REMINDER)
            .expect("bundled templates are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("no-sample: no other test of project `{0}` can serve as the one-shot sample")]
    NoSample(String),
    #[error("sample-oversize: sample `{0}` exceeds the prompt budget")]
    SampleOversize(String),
    #[error("target-oversize: `{0}` exceeds the prompt budget")]
    TargetOversize(String),
}

/// Picks the one-shot sample: the most similarly named test of the same class,
/// else of the same project. Ties go to the smallest id.
pub fn select_one_shot_sample<'c>(
    target: &TestAssertEntry,
    corpus: &'c [TestAssertEntry],
) -> Result<&'c TestAssertEntry, PromptError> {
    let candidates: Vec<&TestAssertEntry> = corpus
        .iter()
        .filter(|c| c.id != target.id && c.project == target.project && !c.is_oversize())
        .collect();
    let same_class: Vec<&TestAssertEntry> = candidates
        .iter()
        .copied()
        .filter(|c| c.file_path == target.file_path && c.class_name == target.class_name)
        .collect();
    let pool = if same_class.is_empty() { candidates } else { same_class };
    pool.into_iter()
        .map(|c| (name_similarity(&target.method_name, &c.method_name), c))
        .max_by(|(sa, a), (sb, b)| sa.total_cmp(sb).then_with(|| b.id.cmp(&a.id)))
        .map(|(_, c)| c)
        .ok_or_else(|| PromptError::NoSample(target.project.clone()))
}

fn framework_instruction(flavor: Flavor) -> &'static str {
    match flavor {
        Flavor::Library => LIBRARY_INSTRUCTION,
        Flavor::Keyword => KEYWORD_INSTRUCTION,
    }
}

/// Ground-truth list of an entry as it appears under "Generated Assertions:".
pub fn sample_assertions(entry: &TestAssertEntry) -> String {
    let spans = placeholder::scan(&entry.masked_test_source);
    let texts: Vec<(u32, String)> = entry
        .asserts
        .iter()
        .map(|a| {
            let indent = spans
                .iter()
                .find(|s| s.index == a.index)
                .map_or("", |s| s.indent.as_str());
            (a.index, placeholder::dedent_continuation(&a.text, indent))
        })
        .collect();
    format_assertion_list(texts.iter().map(|(i, t)| (*i, t.as_str())))
}

pub fn render_greeting(
    templates: &TemplateSet,
    target: &TestAssertEntry,
    sample: &TestAssertEntry,
) -> Result<PromptMessage, PromptError> {
    if sample.is_oversize() {
        return Err(PromptError::SampleOversize(sample.id.clone()));
    }
    let cot = generate_cot(sample, CotMode::Sample);
    let assertions = sample_assertions(sample);
    let text = templates.greeting.render(&[
        ("framework", framework_instruction(target.flavor)),
        ("sample_focal", &sample.focal_method_source),
        ("sample_test", &sample.masked_test_source),
        ("sample_cot", &cot),
        ("sample_assertions", &assertions),
    ]);
    Ok(PromptMessage { phase: Phase::Greeting, text, entry_id: target.id.clone() })
}

pub fn render_query(
    templates: &TemplateSet,
    target: &TestAssertEntry,
) -> Result<PromptMessage, PromptError> {
    if target.is_oversize() {
        return Err(PromptError::TargetOversize(target.id.clone()));
    }
    let globals = if target.globals_source.trim().is_empty() {
        String::new()
    } else {
        format!("Global Variables:\n{}\n\n", target.globals_source)
    };
    let count = format!("{}", target.asserts.len());
    let placeholders = target
        .asserts
        .iter()
        .map(|a| placeholder(a.index))
        .collect::<Vec<_>>()
        .join(", ");
    let cot = generate_cot(target, CotMode::Target);
    let text = templates.query.render(&[
        ("focal", &target.focal_method_source),
        ("globals_section", &globals),
        ("test", &target.masked_test_source),
        ("count", &count),
        ("placeholders", &placeholders),
        ("cot", &cot),
    ]);
    Ok(PromptMessage { phase: Phase::Query, text, entry_id: target.id.clone() })
}

/// `Expected= x, Actual= y, Details= ...` line for one failure.
pub fn failure_line(f: &FailureDetail) -> String {
    format!("Expected= {}, Actual= {}, Details= {}", f.expected, f.actual, f.message)
}

pub fn render_feedback(
    templates: &TemplateSet,
    entry_id: &str,
    failures: &[FailureDetail],
    previous: &PredictionSet,
) -> PromptMessage {
    let mut ordered: Vec<&FailureDetail> = failures.iter().collect();
    ordered.sort_by_key(|f| f.placeholder_index);
    let mut blocks = ordered
        .into_iter()
        .map(|f| {
            let head = match previous.get(f.placeholder_index) {
                Some(pred) if f.placeholder_index > 0 => {
                    format!("{}: {}", placeholder(f.placeholder_index), pred)
                }
                _ => String::from("Unattributed failure:"),
            };
            format!("{head}\n{}", failure_line(f))
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    blocks.push('\n');
    let text = templates.feedback.render(&[("failures", &blocks)]);
    PromptMessage { phase: Phase::Feedback, text, entry_id: String::from(entry_id) }
}

/// Format reminder sent once after an unreadable reply.
pub fn render_reminder(templates: &TemplateSet, expected_count: usize) -> String {
    templates.reminder.render(&[("count", &format!("{expected_count}"))])
}
