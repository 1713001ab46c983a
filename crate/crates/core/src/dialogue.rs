//! Per-entry dialogue: greeting, query, one optional feedback round.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{
    ExecutionReport, GenerationRecord, PredictionSet, RecordStatus, Role, Round, TestAssertEntry,
    Transcript, Verdict,
};
use crate::prompt::{
    parse_predictions, render_feedback, render_greeting, render_query, render_reminder,
    select_one_shot_sample, PromptError, TemplateSet,
};

/// Sampling and transport settings for the chat backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub max_response_chars: usize,
    pub model_name: String,
    pub request_timeout_s: u64,
    pub max_retries: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.3,
            max_response_chars: 16_000,
            model_name: String::from("gpt-3.5-turbo"),
            request_timeout_s: 120,
            max_retries: 3,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} is outside [0, 2]", self.temperature));
        }
        if self.max_response_chars == 0 {
            return Err(String::from("max_response_chars must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend-unavailable: {0}")]
    Unavailable(String),
    #[error("replay-miss: no scripted response for `{entry_id}` turn {ordinal}")]
    ReplayMiss { entry_id: String, ordinal: usize },
    #[error("context-overflow: {0}")]
    ContextOverflow(String),
}

/// A chat-completion model.
pub trait ChatBackend {
    /// Reply to `message` given the turns already in `history`.
    fn respond(
        &self,
        history: &Transcript,
        message: &str,
        cfg: &GenerationConfig,
    ) -> Result<String, BackendError>;

    /// Sends `message` and appends both it and the reply to `transcript`.
    fn send(
        &self,
        transcript: &mut Transcript,
        message: &str,
        cfg: &GenerationConfig,
    ) -> Result<String, BackendError> {
        let reply = self.respond(transcript, message, cfg)?;
        transcript.push(Role::User, message);
        transcript.push(Role::Assistant, reply.clone());
        Ok(reply)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn respond(
        &self,
        history: &Transcript,
        message: &str,
        cfg: &GenerationConfig,
    ) -> Result<String, BackendError> {
        (**self).respond(history, message, cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ExecutorError(pub String);

/// Runs an entry's test with predicted asserts in place.
pub trait AssertExecutor {
    fn execute(
        &mut self,
        entry: &TestAssertEntry,
        preds: &PredictionSet,
    ) -> Result<ExecutionReport, ExecutorError>;
}

enum Halt {
    Status(RecordStatus, String),
}

impl From<BackendError> for Halt {
    fn from(e: BackendError) -> Self {
        let status = match e {
            BackendError::ContextOverflow(_) => RecordStatus::Oversize,
            _ => RecordStatus::BackendError,
        };
        Halt::Status(status, format!("{e}"))
    }
}

impl From<PromptError> for Halt {
    fn from(e: PromptError) -> Self {
        let status = match e {
            PromptError::NoSample(_) => RecordStatus::NoSample,
            PromptError::SampleOversize(_) | PromptError::TargetOversize(_) => RecordStatus::Oversize,
        };
        Halt::Status(status, format!("{e}"))
    }
}

struct Session<'a, B: ChatBackend, X: AssertExecutor> {
    entry: &'a TestAssertEntry,
    templates: &'a TemplateSet,
    backend: &'a B,
    executor: &'a mut X,
    cfg: &'a GenerationConfig,
    record: GenerationRecord,
}

impl<B: ChatBackend, X: AssertExecutor> Session<'_, B, X> {
    fn send(&mut self, message: &str) -> Result<String, Halt> {
        Ok(self.backend.send(&mut self.record.transcript, message, self.cfg)?)
    }

    fn ask(&mut self, message: &str, round: u32) -> Result<PredictionSet, Halt> {
        let count = self.entry.asserts.len();
        let reply = self.send(message)?;
        match parse_predictions(&reply, count, &self.entry.id, round) {
            Ok(set) => Ok(set),
            Err(_) => {
                let reminder = render_reminder(self.templates, count);
                let reply = self.send(&reminder)?;
                parse_predictions(&reply, count, &self.entry.id, round)
                    .map_err(|e| Halt::Status(RecordStatus::Unparseable, format!("{e}")))
            }
        }
    }

    fn execute(&mut self, preds: &PredictionSet) -> ExecutionReport {
        self.executor
            .execute(self.entry, preds)
            .unwrap_or_else(|e| ExecutionReport::error(&self.entry.id, e.0))
    }

    fn push_round(&mut self, predictions: PredictionSet, report: ExecutionReport) {
        self.record.final_predictions = Some(predictions.clone());
        self.record.rounds.push(Round { predictions, report });
    }

    fn run(&mut self, corpus: &[TestAssertEntry]) -> Result<(), Halt> {
        let sample = select_one_shot_sample(self.entry, corpus)?;
        self.record.sample_id = Some(sample.id.clone());
        let greeting = render_greeting(self.templates, self.entry, sample)?;
        let query = render_query(self.templates, self.entry)?;
        self.send(&greeting.text)?;

        let first = self.ask(&query.text, 1)?;
        let report = self.execute(&first);
        let verdict = report.verdict;
        let failures = report.failures.clone();
        self.push_round(first.clone(), report);
        match verdict {
            Verdict::Passed => return Ok(()),
            Verdict::Error | Verdict::Timeout => {
                return Err(Halt::Status(RecordStatus::RunnerError, format!("round 1 verdict {verdict:?}")))
            }
            Verdict::Failed if failures.is_empty() => return Ok(()),
            Verdict::Failed => {}
        }

        let feedback = render_feedback(self.templates, &self.entry.id, &failures, &first);
        let revised = self.ask(&feedback.text, 2)?;
        let merged = merge_rounds(&first, revised, &failures);
        let report = self.execute(&merged);
        self.push_round(merged, report);
        Ok(())
    }
}

/// Takes round-2 predictions only for the placeholders named by a failure,
/// or all of them when some failure could not be attributed.
fn merge_rounds(
    first: &PredictionSet,
    mut revised: PredictionSet,
    failures: &[crate::model::FailureDetail],
) -> PredictionSet {
    if failures.iter().any(|f| f.placeholder_index == 0) {
        return revised;
    }
    for p in &mut revised.predictions {
        if !failures.iter().any(|f| f.placeholder_index == p.index) {
            if let Some(old) = first.get(p.index) {
                p.text = String::from(old);
            }
        }
    }
    revised
}

/// Runs the whole dialogue for `entry`, sampling the one-shot example from `corpus`.
///
/// Stage errors end the dialogue early; rounds completed so far stay in the record.
pub fn generate_for_entry<B: ChatBackend, X: AssertExecutor>(
    entry: &TestAssertEntry,
    corpus: &[TestAssertEntry],
    templates: &TemplateSet,
    backend: &B,
    executor: &mut X,
    cfg: &GenerationConfig,
) -> GenerationRecord {
    let mut session = Session {
        entry,
        templates,
        backend,
        executor,
        cfg,
        record: GenerationRecord {
            entry_id: entry.id.clone(),
            status: RecordStatus::Ok,
            rounds: Vec::new(),
            final_predictions: None,
            sample_id: None,
            error: None,
            transcript: Transcript::new(entry.id.clone()),
        },
    };
    if entry.is_oversize() {
        let Halt::Status(status, msg) = Halt::from(PromptError::TargetOversize(entry.id.clone()));
        session.record.status = status;
        session.record.error = Some(msg);
        return session.record;
    }
    if let Err(Halt::Status(status, msg)) = session.run(corpus) {
        session.record.status = status;
        session.record.error = Some(msg);
    }
    session.record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AssertStatement, FailureDetail, Flavor, Prediction};
    use crate::placeholder::placeholder;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;
    use core::cell::RefCell;

    struct Script(BTreeMap<(String, usize), String>);

    impl Script {
        fn new(replies: &[(&str, usize, &str)]) -> Self {
            Script(
                replies
                    .iter()
                    .map(|(id, n, r)| ((id.to_string(), *n), r.to_string()))
                    .collect(),
            )
        }
    }

    impl ChatBackend for Script {
        fn respond(&self, h: &Transcript, _: &str, _: &GenerationConfig) -> Result<String, BackendError> {
            let ordinal = h.user_turns();
            self.0
                .get(&(h.entry_id.clone(), ordinal))
                .cloned()
                .ok_or(BackendError::ReplayMiss { entry_id: h.entry_id.clone(), ordinal })
        }
    }

    /// Passes when every prediction equals the ground truth.
    struct Oracle {
        calls: RefCell<usize>,
    }

    impl AssertExecutor for Oracle {
        fn execute(&mut self, e: &TestAssertEntry, p: &PredictionSet) -> Result<ExecutionReport, ExecutorError> {
            *self.calls.borrow_mut() += 1;
            let failures: Vec<FailureDetail> = e
                .asserts
                .iter()
                .filter(|a| p.get(a.index) != Some(a.text.as_str()))
                .take(1)
                .map(|a| FailureDetail {
                    placeholder_index: a.index,
                    expected: "5".into(),
                    actual: "4".into(),
                    message: "assert 4 == 5".into(),
                })
                .collect();
            Ok(ExecutionReport {
                entry_id: e.id.clone(),
                verdict: if failures.is_empty() { Verdict::Passed } else { Verdict::Failed },
                failures,
                raw_output: String::new(),
                duration_s: 0.0,
            })
        }
    }

    fn oracle() -> Oracle {
        Oracle { calls: RefCell::new(0) }
    }

    fn entry(id: &str, name: &str, truth: &[&str]) -> TestAssertEntry {
        let mut masked = format!("def {name}():\n    x = f()\n");
        for i in 1..=truth.len() {
            masked.push_str(&format!("    {}\n", placeholder(i as u32)));
        }
        TestAssertEntry {
            id: id.into(),
            project: "p".into(),
            file_path: "tests/test_f.py".into(),
            class_name: None,
            method_name: name.into(),
            flavor: Flavor::Keyword,
            revision: "r".into(),
            focal_method_source: "def f():\n    return 4".into(),
            masked_test_source: masked,
            globals_source: String::new(),
            asserts: truth
                .iter()
                .enumerate()
                .map(|(i, t)| AssertStatement {
                    index: i as u32 + 1,
                    text: (*t).into(),
                    method_kind: "assert".into(),
                    arg_texts: vec![],
                })
                .collect(),
            flags: vec![],
        }
    }

    fn answer(items: &[&str]) -> String {
        let mut s = String::from("Step 1: ...\nGenerated Assertions:\n");
        for (i, t) in items.iter().enumerate() {
            s.push_str(&format!("{}. {}\n", i + 1, t));
        }
        s
    }

    fn corpus() -> Vec<TestAssertEntry> {
        vec![
            entry("p::t::test_a", "test_a", &["assert x == 4"]),
            entry("p::t::test_b", "test_b", &["assert x == 4", "assert x > 0", "assert x"]),
        ]
    }

    #[test]
    fn happy_path_has_one_round() {
        let c = corpus();
        let script = Script::new(&[("p::t::test_a", 0, "ok"), ("p::t::test_a", 1, &answer(&["assert x == 4"]))]);
        let mut x = oracle();
        let r = generate_for_entry(&c[0], &c, &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.status, RecordStatus::Ok);
        assert_eq!(r.rounds.len(), 1);
        assert_eq!(r.sample_id.as_deref(), Some("p::t::test_b"));
        assert_eq!(r.transcript.turns.len(), 4);
        assert!(r.transcript.is_well_formed());
    }

    #[test]
    fn wrong_value_gets_exactly_one_feedback_round() {
        let c = corpus();
        let script = Script::new(&[
            ("p::t::test_a", 0, "ok"),
            ("p::t::test_a", 1, &answer(&["assert x == 5"])),
            ("p::t::test_a", 2, &answer(&["assert x == 4"])),
        ]);
        let mut x = oracle();
        let r = generate_for_entry(&c[0], &c, &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.status, RecordStatus::Ok);
        assert_eq!(r.rounds.len(), 2);
        assert_eq!(r.rounds[1].report.verdict, Verdict::Passed);
        assert_eq!(r.final_predictions.unwrap().get(1), Some("assert x == 4"));
        assert!(r.transcript.turns[4].text.contains("Expected= 5, Actual= 4"));
    }

    #[test]
    fn round_two_failure_does_not_loop() {
        let c = corpus();
        let script = Script::new(&[
            ("p::t::test_a", 0, "ok"),
            ("p::t::test_a", 1, &answer(&["assert x == 5"])),
            ("p::t::test_a", 2, &answer(&["assert x == 6"])),
        ]);
        let mut x = oracle();
        let r = generate_for_entry(&c[0], &c, &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.rounds.len(), 2);
        assert_eq!(*x.calls.borrow(), 2);
        assert_eq!(r.rounds[1].report.verdict, Verdict::Failed);
    }

    #[test]
    fn malformed_reply_is_asked_once_more() {
        let c = corpus();
        let three = answer(&["assert x == 4", "assert x > 0", "assert x"]);
        let script = Script::new(&[
            ("p::t::test_b", 0, "ok"),
            ("p::t::test_b", 1, &answer(&["assert x == 4", "assert x > 0"])),
            ("p::t::test_b", 2, &three),
        ]);
        let mut x = oracle();
        let r = generate_for_entry(&c[1], &c, &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.status, RecordStatus::Ok);
        let idx: Vec<u32> = r.final_predictions.unwrap().predictions.iter().map(|p| p.index).collect();
        assert_eq!(idx, [1, 2, 3]);
        assert!(r.transcript.turns[4].text.contains("EXACTLY 3 numbered"));
    }

    #[test]
    fn second_malformed_reply_is_unparseable() {
        let c = corpus();
        let script = Script::new(&[
            ("p::t::test_b", 0, "ok"),
            ("p::t::test_b", 1, "no list"),
            ("p::t::test_b", 2, "still none"),
        ]);
        let mut x = oracle();
        let r = generate_for_entry(&c[1], &c, &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.status, RecordStatus::Unparseable);
        assert!(r.rounds.is_empty());
        assert!(r.error.unwrap().starts_with("malformed-response"));
    }

    #[test]
    fn replay_miss_keeps_first_round() {
        let c = corpus();
        let script = Script::new(&[("p::t::test_a", 0, "ok"), ("p::t::test_a", 1, &answer(&["assert x == 5"]))]);
        let mut x = oracle();
        let r = generate_for_entry(&c[0], &c, &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.status, RecordStatus::BackendError);
        assert_eq!(r.rounds.len(), 1);
        assert!(r.error.unwrap().starts_with("replay-miss"));
    }

    #[test]
    fn lone_entry_has_no_sample() {
        let c = corpus();
        let script = Script::new(&[]);
        let mut x = oracle();
        let r = generate_for_entry(&c[0], &c[..1], &TemplateSet::default(), &script, &mut x, &GenerationConfig::default());
        assert_eq!(r.status, RecordStatus::NoSample);
        assert!(r.transcript.turns.is_empty());
    }

    #[test]
    fn merge_keeps_unnamed_placeholders() {
        let set = |texts: &[&str]| PredictionSet {
            entry_id: "e".into(),
            round: 1,
            predictions: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Prediction { index: i as u32 + 1, text: (*t).into() })
                .collect(),
            raw_response: String::new(),
        };
        let fail = |i| FailureDetail { placeholder_index: i, expected: "".into(), actual: "".into(), message: "m".into() };
        let merged = merge_rounds(&set(&["a", "b"]), set(&["A", "B"]), &[fail(2)]);
        assert_eq!(merged.get(1), Some("a"));
        assert_eq!(merged.get(2), Some("B"));
        let merged = merge_rounds(&set(&["a", "b"]), set(&["A", "B"]), &[fail(0)]);
        assert_eq!(merged.get(1), Some("A"));
    }

    #[test]
    fn temperature_bounds() {
        let mut cfg = GenerationConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.temperature = 2.5;
        assert!(cfg.validate().is_err());
    }
}
