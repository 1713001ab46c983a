//! Mine Python unit tests into test-assert entries, generate asserts for them
//! through a chat model with one execution-feedback round, and score the results.

pub mod analyzer;
pub mod config;
pub mod harness;
pub mod llm;
pub mod pipeline;
pub mod report;
pub mod store;

use std::collections::HashMap;
use std::path::Path;

use assertgen_core::metrics::{summarize, EquivalenceTable, LcsUnit, MetricsSummary};
use assertgen_core::model::{GenerationRecord, TestAssertEntry};
use assertgen_core::prompt::{TemplateError, TemplateSet};

pub use assertgen_core as core;

/// Loads `greeting.txt`, `query.txt`, `feedback.txt` and `reminder.txt` from `dir`.
pub fn load_templates(dir: &Path) -> anyhow::Result<TemplateSet> {
    let read = |name: &str| -> anyhow::Result<String> {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
    };
    TemplateSet::from_sources(
        &read("greeting.txt")?,
        &read("query.txt")?,
        &read("feedback.txt")?,
        &read("reminder.txt")?,
    )
    .map_err(|e: TemplateError| anyhow::anyhow!("{}: {e}", dir.display()))
}

pub fn load_table(path: Option<&Path>) -> anyhow::Result<EquivalenceTable> {
    match path {
        None => Ok(EquivalenceTable::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
            EquivalenceTable::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
        }
    }
}

/// Scores records against the dataset; records without an entry are counted as skipped.
pub fn evaluate(
    records: &[GenerationRecord],
    dataset: &[TestAssertEntry],
    table: &EquivalenceTable,
    unit: LcsUnit,
) -> MetricsSummary {
    let by_id: HashMap<&str, &TestAssertEntry> = dataset.iter().map(|e| (e.id.as_str(), e)).collect();
    for r in records {
        if !by_id.contains_key(r.entry_id.as_str()) {
            log::warn!("no dataset entry for record `{}`; skipped", r.entry_id);
        }
    }
    summarize(records, |id| by_id.get(id).copied(), table, unit)
}
