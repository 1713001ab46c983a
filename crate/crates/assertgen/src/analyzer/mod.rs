//! Mines a Python checkout into test-assert entries.

mod index;
mod syntax;

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::fmt;
use std::path::{Path, PathBuf};

use assertgen_core::model::{flags, payload_chars, TestAssertEntry};

pub use index::{identify_focal_method, revision_of, Callable, ProjectIndex};
pub use syntax::{
    collect_context, extract_asserts, extract_test_methods, is_valid_python, node_id, SyntaxError,
    TestMethod,
};

pub const DEFAULT_MAX_PROMPT_CHARS: usize = 12_000;

const SKIPPED_DIRS: &[&str] = &[".git", "venv", ".venv", "build", "dist", "__pycache__"];

pub(crate) fn is_skipped_dir(name: &OsStr) -> bool {
    SKIPPED_DIRS.iter().any(|d| OsStr::new(d) == name)
}

/// `test_*.py` or `*_test.py`.
pub fn is_test_file(name: &str) -> bool {
    name.ends_with(".py") && (name.starts_with("test_") || name.ends_with("_test.py"))
}

/// Test files under `root`, relative to it and sorted.
pub fn discover_test_files(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::read_dir(root)?;
    let mut out = Vec::new();
    let walker = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| !(e.depth() > 0 && e.file_type().is_dir() && is_skipped_dir(e.file_name())));
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                log::warn!("skipping unreadable path: {err}");
                continue;
            }
        };
        if entry.file_type().is_file() && is_test_file(&entry.file_name().to_string_lossy()) {
            if let Ok(rel) = entry.path().strip_prefix(root) {
                out.push(rel.to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Reason {
    NoAsserts,
    NoFocal,
    ParseError,
    Oversize,
    DuplicateId,
}

impl Reason {
    pub fn code(self) -> &'static str {
        match self {
            Reason::NoAsserts => "no-asserts",
            Reason::NoFocal => "no-focal",
            Reason::ParseError => "parse-error",
            Reason::Oversize => "oversize",
            Reason::DuplicateId => "duplicate-id",
        }
    }
}

/// One line of the mining log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub reason: Reason,
    /// Entry id, or the file path for file-level problems.
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.reason.code(), self.location, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct MineOptions {
    pub project: String,
    /// Overrides the revision read from git.
    pub revision: Option<String>,
    pub max_prompt_chars: usize,
}

impl MineOptions {
    pub fn new(project: impl Into<String>) -> Self {
        MineOptions {
            project: project.into(),
            revision: None,
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MineOutcome {
    pub entries: Vec<TestAssertEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

impl MineOutcome {
    pub fn single_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_multi_assert()).count()
    }

    pub fn multi_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_multi_assert()).count()
    }
}

pub fn entry_id(project: &str, file_path: &str, class_name: Option<&str>, method_name: &str) -> String {
    format!("{project}::{}", node_id(file_path, class_name, method_name))
}

/// Turns one test method into an entry, or says why it cannot be one.
pub fn build_entry(
    test: &TestMethod,
    index: &ProjectIndex,
    globals: &str,
    opts: &MineOptions,
    revision: &str,
) -> Result<TestAssertEntry, Diagnostic> {
    let id = entry_id(&opts.project, &test.file_path, test.class_name.as_deref(), &test.method_name);
    let reject = |reason: Reason, detail: String| Diagnostic { reason, location: id.clone(), detail };
    let (masked, asserts, nested) =
        extract_asserts(test).map_err(|e| reject(Reason::ParseError, e.to_string()))?;
    if asserts.is_empty() {
        return Err(reject(Reason::NoAsserts, "test has no assert statements".into()));
    }
    let focal = identify_focal_method(test, index)
        .ok_or_else(|| reject(Reason::NoFocal, "no call to a project-defined callable".into()))?;
    let mut entry_flags = Vec::new();
    if test.decorated {
        entry_flags.push(flags::DECORATED.to_string());
    }
    if nested {
        entry_flags.push(flags::NESTED_ASSERT.to_string());
    }
    if payload_chars(&focal.source, globals, &masked) > opts.max_prompt_chars {
        entry_flags.push(flags::OVERSIZE.to_string());
    }
    Ok(TestAssertEntry {
        id,
        project: opts.project.clone(),
        file_path: test.file_path.clone(),
        class_name: test.class_name.clone(),
        method_name: test.method_name.clone(),
        flavor: test.flavor,
        revision: revision.to_string(),
        focal_method_source: focal.source.clone(),
        masked_test_source: masked,
        globals_source: globals.to_string(),
        asserts,
        flags: entry_flags,
    })
}

/// Runs the analyzer over a checkout. Entries come out in file, then source order.
pub fn mine_project(root: &Path, opts: &MineOptions) -> std::io::Result<MineOutcome> {
    let index = ProjectIndex::build(root)?;
    let revision = opts.revision.clone().unwrap_or_else(|| index.revision.clone());
    let mut outcome = MineOutcome::default();
    for rel in &index.test_files {
        let file = index::rel_string(rel);
        let source = match std::fs::read_to_string(root.join(rel)) {
            Ok(s) => s,
            Err(err) => {
                outcome.diagnostics.push(Diagnostic {
                    reason: Reason::ParseError,
                    location: file,
                    detail: err.to_string(),
                });
                continue;
            }
        };
        let tests = match extract_test_methods(&file, &source) {
            Ok(t) => t,
            Err(err) => {
                outcome.diagnostics.push(Diagnostic {
                    reason: Reason::ParseError,
                    location: file,
                    detail: err.to_string(),
                });
                continue;
            }
        };
        let globals = collect_context(&source);
        let mut last_of: BTreeMap<String, usize> = BTreeMap::new();
        for (i, t) in tests.iter().enumerate() {
            last_of.insert(t.node_id(), i);
        }
        for (i, test) in tests.iter().enumerate() {
            if last_of[&test.node_id()] != i {
                outcome.diagnostics.push(Diagnostic {
                    reason: Reason::DuplicateId,
                    location: entry_id(&opts.project, &file, test.class_name.as_deref(), &test.method_name),
                    detail: format!("redefined later at line {}", tests[last_of[&test.node_id()]].start_line),
                });
                continue;
            }
            match build_entry(test, &index, &globals, opts, &revision) {
                Ok(entry) => {
                    if entry.is_oversize() {
                        outcome.diagnostics.push(Diagnostic {
                            reason: Reason::Oversize,
                            location: entry.id.clone(),
                            detail: format!("payload over {} chars; kept and flagged", opts.max_prompt_chars),
                        });
                    }
                    outcome.entries.push(entry);
                }
                Err(d) => outcome.diagnostics.push(d),
            }
        }
    }
    Ok(outcome)
}
