//! Runs a test with predicted asserts in a sandboxed copy of its project.

mod parse;

use std::collections::BTreeMap;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::LazyLock;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;

use assertgen_core::dialogue::{AssertExecutor, ExecutorError};
use assertgen_core::model::{ExecutionReport, PredictionSet, TestAssertEntry, Verdict};
use assertgen_core::placeholder::{inject_asserts, placeholder};

use crate::analyzer::{extract_test_methods, is_skipped_dir, is_valid_python};

pub use parse::{
    attribute, parse_failure, parse_structured, parse_text, split_comparison, RawFailure, ShimFailure,
    ShimReport,
};

pub const REPORT_FILE: &str = ".clap_report.json";
pub const REPORT_PATH_ENV: &str = "CLAP_REPORT_PATH";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("runner-missing: `{0}` was not found")]
    RunnerMissing(String),
    #[error("test `{0}` not found in the project copy")]
    TestNotFound(String),
    #[error("no project root configured for project `{0}`")]
    NoProjectRoot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A disposable copy of a project; the origin is only ever read.
#[derive(Debug)]
pub struct Workspace {
    origin_root: PathBuf,
    sandbox: tempfile::TempDir,
    pub active: bool,
}

fn copy_tree(from: &Path, to: &Path) -> io::Result<()> {
    let walker = walkdir::WalkDir::new(from).into_iter().filter_entry(|e| {
        !(e.depth() > 0
            && e.file_type().is_dir()
            && (is_skipped_dir(e.file_name()) || e.file_name() == ".pytest_cache"))
    });
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(from).map_err(io::Error::other)?;
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest)?;
        } else if entry.path().is_file() {
            std::fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}

impl Workspace {
    pub fn create(origin_root: &Path) -> io::Result<Self> {
        let sandbox = tempfile::Builder::new().prefix("assertgen-").tempdir()?;
        copy_tree(origin_root, sandbox.path())?;
        Ok(Workspace { origin_root: origin_root.to_path_buf(), sandbox, active: true })
    }

    pub fn origin_root(&self) -> &Path {
        &self.origin_root
    }

    pub fn sandbox_root(&self) -> &Path {
        self.sandbox.path()
    }

    pub fn read_origin(&self, rel: &str) -> io::Result<String> {
        std::fs::read_to_string(self.origin_root.join(rel))
    }

    pub fn write(&self, rel: &str, contents: &str) -> io::Result<()> {
        std::fs::write(self.sandbox_root().join(rel), contents)
    }

    /// Puts the origin's copy of `rel` back into the sandbox.
    pub fn restore(&self, rel: &str) -> io::Result<()> {
        std::fs::copy(self.origin_root.join(rel), self.sandbox_root().join(rel)).map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    /// Program and leading arguments, e.g. `python3 -m pytest`.
    pub command: Vec<String>,
    pub timeout: Duration,
    /// Read the shim's JSON report when present.
    pub structured: bool,
    pub shim_dir: Option<PathBuf>,
    pub shim_plugin: String,
    /// Report `duration_s` as 0 so output is reproducible.
    pub zero_durations: bool,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            command: vec!["python3".into(), "-m".into(), "pytest".into()],
            timeout: Duration::from_secs(60),
            structured: false,
            shim_dir: None,
            shim_plugin: "clap_shim".into(),
            zero_durations: false,
        }
    }
}

/// What the runner printed and how it ended.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub output: String,
    pub duration: Duration,
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

fn report_path(ws: &Workspace) -> PathBuf {
    match std::env::var_os(REPORT_PATH_ENV) {
        Some(p) => ws.sandbox_root().join(p),
        None => ws.sandbox_root().join(REPORT_FILE),
    }
}

/// Runs exactly one test node in the sandbox.
pub fn run_node(ws: &Workspace, node_id: &str, cfg: &RunnerConfig) -> Result<RunOutcome, HarnessError> {
    let (program, args) = cfg
        .command
        .split_first()
        .ok_or_else(|| HarnessError::RunnerMissing(String::new()))?;
    let mut cmd = Command::new(program);
    cmd.args(args)
        .args(["-q", "--tb=short", "-p", "no:cacheprovider", "-o", "verbosity_assertions=2"])
        .current_dir(ws.sandbox_root())
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PY_COLORS", "0")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    if cfg.structured {
        cmd.args(["-p", &cfg.shim_plugin]);
        if let Some(dir) = &cfg.shim_dir {
            let mut paths = vec![dir.clone()];
            if let Some(old) = std::env::var_os("PYTHONPATH") {
                paths.extend(std::env::split_paths(&old));
            }
            cmd.env("PYTHONPATH", std::env::join_paths(paths).map_err(io::Error::other)?);
        }
    }
    cmd.arg(node_id);

    let started = Instant::now();
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => HarnessError::RunnerMissing(program.clone()),
        _ => HarnessError::Io(e),
    })?;
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if started.elapsed() >= cfg.timeout {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        thread::sleep(Duration::from_millis(20));
    };
    let duration = started.elapsed();
    let mut output = String::from_utf8_lossy(&out.join().unwrap_or_default()).into_owned();
    let stderr = err.join().unwrap_or_default();
    if !stderr.is_empty() {
        output.push_str(&String::from_utf8_lossy(&stderr));
    }
    Ok(RunOutcome {
        exit_code: status.and_then(|s| s.code()),
        timed_out,
        output,
        duration,
    })
}

static TIMING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m) in [0-9.]+s(?: \([0-9:]+\))?( =+)?$").unwrap());
static FAILED_COUNT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d+ failed\b").unwrap());

/// Removes sandbox paths and timings from runner output.
pub fn scrub(output: &str, sandbox: &Path) -> String {
    let mut s = output.to_string();
    let mut roots = vec![sandbox.to_path_buf()];
    if let Ok(c) = sandbox.canonicalize() {
        roots.push(c);
    }
    for r in roots {
        s = s.replace(&*r.to_string_lossy(), "<sandbox>");
    }
    TIMING.replace_all(&s, "$1").into_owned()
}

/// Where the predicted asserts sit in the patched file.
#[derive(Debug, Clone)]
pub struct PatchedTest {
    pub file_path: String,
    pub node_id: String,
    pub contents: String,
    /// (placeholder index, first line, last line), 1-based.
    pub ranges: Vec<(u32, usize, usize)>,
}

/// Splices the entry's test with `preds` in place into the current text of its file.
pub fn patch_file(entry: &TestAssertEntry, preds: &PredictionSet, file_source: &str) -> Result<PatchedTest, String> {
    let injected = inject_asserts(entry, preds).map_err(|e| format!("{e:?}"))?;
    let tests = extract_test_methods(&entry.file_path, file_source).map_err(|e| e.to_string())?;
    let test = tests
        .iter()
        .rev()
        .find(|t| t.method_name == entry.method_name && t.class_name == entry.class_name)
        .ok_or_else(|| format!("test `{}` not found in {}", entry.id, entry.file_path))?;
    let mut contents = String::with_capacity(file_source.len() + injected.source.len());
    contents.push_str(&file_source[..test.start_byte]);
    contents.push_str(&injected.source);
    contents.push_str(&file_source[test.end_byte..]);
    let base = file_source[..test.start_byte].matches('\n').count();
    let line_of = |at: usize| base + injected.source[..at].matches('\n').count() + 1;
    let ranges = injected
        .spans
        .iter()
        .map(|(i, s, e)| (*i, line_of(*s), line_of(*e)))
        .collect();
    Ok(PatchedTest {
        node_id: test.node_id(),
        file_path: entry.file_path.clone(),
        contents,
        ranges,
    })
}

/// The prediction that fails a standalone parse, if any.
pub fn syntax_problem(preds: &PredictionSet) -> Option<String> {
    preds
        .predictions
        .iter()
        .find(|p| !is_valid_python(p.text.trim()))
        .map(|p| format!("syntax: {} does not parse: {}", placeholder(p.index), p.text))
}

/// Maps a finished run to a report.
pub fn build_report(
    entry_id: &str,
    patched: &PatchedTest,
    run: &RunOutcome,
    structured: Option<RawFailure>,
    sandbox: &Path,
) -> ExecutionReport {
    let raw_output = scrub(&run.output, sandbox);
    let verdict = match (run.timed_out, run.exit_code) {
        (true, _) => Verdict::Timeout,
        (false, Some(0)) => Verdict::Passed,
        (false, Some(1)) if FAILED_COUNT.is_match(&raw_output) => Verdict::Failed,
        _ => Verdict::Error,
    };
    let failures = if verdict == Verdict::Failed {
        let raw = structured.unwrap_or_else(|| parse_text(&raw_output, Some(&patched.file_path)));
        vec![raw.attribute(&patched.ranges)]
    } else {
        Vec::new()
    };
    ExecutionReport {
        entry_id: entry_id.to_string(),
        verdict,
        failures,
        raw_output,
        duration_s: run.duration.as_secs_f64(),
    }
}

/// Patches, runs and restores one test.
pub fn run_test(
    ws: &Workspace,
    entry: &TestAssertEntry,
    preds: &PredictionSet,
    cfg: &RunnerConfig,
) -> Result<ExecutionReport, HarnessError> {
    if let Some(problem) = syntax_problem(preds) {
        return Ok(ExecutionReport::error(&entry.id, problem));
    }
    let original = ws.read_origin(&entry.file_path)?;
    let patched = patch_file(entry, preds, &original).map_err(|_| HarnessError::TestNotFound(entry.id.clone()))?;
    let report_file = report_path(ws);
    if cfg.structured {
        let _ = std::fs::remove_file(&report_file);
    }
    ws.write(&patched.file_path, &patched.contents)?;
    let run = run_node(ws, &patched.node_id, cfg);
    ws.restore(&patched.file_path)?;
    let run = run?;
    let structured = if cfg.structured {
        std::fs::read_to_string(&report_file)
            .ok()
            .and_then(|json| parse_structured(&json, &patched.node_id))
    } else {
        None
    };
    let mut report = build_report(&entry.id, &patched, &run, structured, ws.sandbox_root());
    if cfg.zero_durations {
        report.duration_s = 0.0;
    }
    Ok(report)
}

/// Where each project's checkout lives.
#[derive(Debug, Clone, Default)]
pub struct ProjectRoots {
    pub default: Option<PathBuf>,
    pub named: BTreeMap<String, PathBuf>,
}

impl ProjectRoots {
    pub fn single(root: impl Into<PathBuf>) -> Self {
        ProjectRoots { default: Some(root.into()), named: BTreeMap::new() }
    }

    pub fn root_for(&self, project: &str) -> Option<&Path> {
        self.named.get(project).or(self.default.as_ref()).map(PathBuf::as_path)
    }
}

/// Executor backed by pytest; keeps one sandbox per project.
#[derive(Debug)]
pub struct PytestExecutor {
    pub roots: ProjectRoots,
    pub runner: RunnerConfig,
    workspaces: BTreeMap<String, Workspace>,
}

impl PytestExecutor {
    pub fn new(roots: ProjectRoots, runner: RunnerConfig) -> Self {
        PytestExecutor { roots, runner, workspaces: BTreeMap::new() }
    }

    fn workspace(&mut self, project: &str) -> Result<&Workspace, HarnessError> {
        if !self.workspaces.contains_key(project) {
            let root = self
                .roots
                .root_for(project)
                .ok_or_else(|| HarnessError::NoProjectRoot(project.to_string()))?;
            self.workspaces.insert(project.to_string(), Workspace::create(root)?);
        }
        Ok(&self.workspaces[project])
    }
}

impl AssertExecutor for PytestExecutor {
    fn execute(&mut self, entry: &TestAssertEntry, preds: &PredictionSet) -> Result<ExecutionReport, ExecutorError> {
        let runner = self.runner.clone();
        let ws = self.workspace(&entry.project).map_err(|e| ExecutorError(e.to_string()))?;
        run_test(ws, entry, preds, &runner).map_err(|e| ExecutorError(e.to_string()))
    }
}
