//! Batch generation over a dataset with a worker pool and resumable output.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::{mpsc, Mutex};

use assertgen_core::dialogue::{generate_for_entry, AssertExecutor, ChatBackend, GenerationConfig};
use assertgen_core::metrics::Arity;
use assertgen_core::model::{Flavor, GenerationRecord, TestAssertEntry};
use assertgen_core::prompt::TemplateSet;

use crate::store::{completed_ids, JsonlAppender, StoreError};

/// Entry selection from `--filter key=value` flags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filters {
    pub project: Option<String>,
    pub asserts: Option<Arity>,
    pub flavor: Option<Flavor>,
}

impl Filters {
    pub fn add(&mut self, spec: &str) -> Result<(), String> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| format!("filter `{spec}` is not key=value"))?;
        match key.trim() {
            "project" => self.project = Some(value.trim().to_string()),
            "asserts" => {
                self.asserts = Some(match value.trim() {
                    "single" => Arity::Single,
                    "multi" => Arity::Multi,
                    other => return Err(format!("asserts filter `{other}` is not single or multi")),
                })
            }
            "flavor" => {
                self.flavor = Some(match value.trim() {
                    "keyword" => Flavor::Keyword,
                    "library" => Flavor::Library,
                    other => return Err(format!("flavor filter `{other}` is not keyword or library")),
                })
            }
            other => return Err(format!("unknown filter key `{other}`")),
        }
        Ok(())
    }

    pub fn matches(&self, e: &TestAssertEntry) -> bool {
        self.project.as_ref().is_none_or(|p| *p == e.project)
            && self.asserts.is_none_or(|a| a == Arity::of(e))
            && self.flavor.is_none_or(|f| f == e.flavor)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub filters: Filters,
    pub resume: bool,
    pub workers: usize,
    pub templates: TemplateSet,
    pub generation: GenerationConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            filters: Filters::default(),
            resume: false,
            workers: 1,
            templates: TemplateSet::default(),
            generation: GenerationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub written: usize,
    pub already_done: usize,
    pub filtered_out: usize,
    pub by_status: BTreeMap<String, usize>,
}

/// Drops a torn last line left by an interrupted run.
fn repair_tail(path: &Path) -> std::io::Result<()> {
    let Ok(bytes) = std::fs::read(path) else { return Ok(()) };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    std::fs::write(path, &bytes[..keep])
}

/// Generates a record for every selected entry and appends it to `out`.
///
/// `corpus` supplies one-shot samples and is normally the whole dataset.
/// Entries of one file always go to the same worker, and records are
/// written in dataset order whatever the worker count.
pub fn run_pipeline<B, X, F>(
    corpus: &[TestAssertEntry],
    out: &Path,
    backend: &B,
    make_executor: F,
    opts: &PipelineOptions,
) -> Result<PipelineStats, StoreError>
where
    B: ChatBackend + Sync,
    X: AssertExecutor,
    F: Fn() -> X + Sync,
{
    let mut stats = PipelineStats::default();
    let done = if opts.resume {
        repair_tail(out).map_err(|source| StoreError::Io { path: out.display().to_string(), source })?;
        completed_ids(out)
    } else {
        Default::default()
    };
    let mut appender = JsonlAppender::open(out, !opts.resume)?;

    let mut pending: Vec<&TestAssertEntry> = Vec::new();
    for e in corpus {
        if !opts.filters.matches(e) {
            stats.filtered_out += 1;
        } else if done.contains(&e.id) {
            stats.already_done += 1;
        } else {
            pending.push(e);
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (pos, e) in pending.iter().enumerate() {
        let g = *group_of.entry((&e.project, &e.file_path)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(pos);
    }
    let queue = Mutex::new(groups.into_iter().collect::<VecDeque<_>>());
    let workers = opts.workers.max(1);
    let total = pending.len();

    let mut write_err = None;
    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel::<(usize, GenerationRecord)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let queue = &queue;
            let pending = &pending;
            let make_executor = &make_executor;
            s.spawn(move || {
                let mut executor = make_executor();
                loop {
                    let Some(group) = queue.lock().unwrap_or_else(|p| p.into_inner()).pop_front() else {
                        break;
                    };
                    for pos in group {
                        let entry = pending[pos];
                        let record = generate_for_entry(
                            entry,
                            corpus,
                            &opts.templates,
                            backend,
                            &mut executor,
                            &opts.generation,
                        );
                        if tx.send((pos, record)).is_err() {
                            return;
                        }
                    }
                }
            });
        }
        drop(tx);

        let mut buffer: BTreeMap<usize, GenerationRecord> = BTreeMap::new();
        let mut next = 0;
        for (pos, record) in rx {
            buffer.insert(pos, record);
            while let Some(record) = buffer.remove(&next) {
                next += 1;
                let status = serde_json::to_value(record.status)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default();
                log::info!("[{next}/{total}] {} {status}", record.entry_id);
                *stats.by_status.entry(status).or_default() += 1;
                if write_err.is_none() {
                    match appender.append(&record) {
                        Ok(()) => stats.written += 1,
                        Err(e) => write_err = Some(e),
                    }
                }
            }
        }
    });
    match write_err {
        Some(e) => Err(e),
        None => Ok(stats),
    }
}
