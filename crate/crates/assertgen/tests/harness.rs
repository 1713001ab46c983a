mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use assertgen::core::dialogue::AssertExecutor;
use assertgen::core::model::Verdict;
use assertgen::harness::{run_test, HarnessError, ProjectRoots, PytestExecutor, RunnerConfig, Workspace};
use common::{failing_output_mismatches, failing_truth, fixture, mine, preds};

fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, hex::encode(Sha256::digest(std::fs::read(e.path()).unwrap())))
        })
        .collect()
}

#[test]
fn captured_outputs_parse_to_recorded_truth() {
    let bad = failing_output_mismatches();
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn live_failures_match_recorded_truth_and_origin_is_untouched() {
    let before = tree_hashes(&fixture("failing"));
    let entries = mine("failing", "failing");
    assert_eq!(entries.len(), 5);
    let mut exec = PytestExecutor::new(ProjectRoots::single(fixture("failing")), RunnerConfig::default());
    for (test, _line, expected, actual, message) in failing_truth() {
        let e = entries.iter().find(|e| e.method_name == test).unwrap();
        let truth: Vec<&str> = e.asserts.iter().map(|a| a.text.as_str()).collect();
        let report = exec.execute(e, &preds(&e.id, &truth)).unwrap();
        assert_eq!(report.verdict, Verdict::Failed, "{test}: {}", report.raw_output);
        let f = &report.failures[0];
        assert_eq!((f.expected.as_str(), f.actual.as_str(), f.message.as_str()), (&*expected, &*actual, &*message));
        let index = if test == "test_exception" { 0 } else { 1 };
        assert_eq!(f.placeholder_index, index, "{test}");
        assert!(report.raw_output.contains("1 failed") && !report.raw_output.contains(" in 0."));
    }
    let e = &entries[0];
    let report = exec.execute(e, &preds(&e.id, &["assert True"])).unwrap();
    assert_eq!(report.verdict, Verdict::Passed, "{}", report.raw_output);
    assert!(report.failures.is_empty());
    assert_eq!(tree_hashes(&fixture("failing")), before);
}

#[test]
fn unparsable_prediction_is_an_error_without_running() {
    let entries = mine("failing", "failing");
    let e = &entries[0];
    let mut exec = PytestExecutor::new(ProjectRoots::single(fixture("failing")), RunnerConfig::default());
    let report = exec.execute(e, &preds(&e.id, &["assert result =="])).unwrap();
    assert_eq!(report.verdict, Verdict::Error);
    assert!(report.raw_output.starts_with("syntax: <AssertPlaceholder1> does not parse"), "{}", report.raw_output);
}

fn temp_project(test_body: &str, conftest: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("slow.py"), "import time\n\n\ndef wait(s):\n    time.sleep(s)\n    return s\n").unwrap();
    std::fs::write(dir.path().join("conftest.py"), conftest).unwrap();
    std::fs::write(dir.path().join("test_slow.py"), test_body).unwrap();
    dir
}

#[test]
fn hanging_test_times_out() {
    let dir = temp_project("from slow import wait\n\n\ndef test_wait():\n    value = wait(30)\n    assert value == 30\n", "");
    let opts = assertgen::analyzer::MineOptions::new("slow");
    let entries = assertgen::analyzer::mine_project(dir.path(), &opts).unwrap().entries;
    let ws = Workspace::create(dir.path()).unwrap();
    let cfg = RunnerConfig { timeout: Duration::from_secs(2), ..RunnerConfig::default() };
    let started = Instant::now();
    let report = run_test(&ws, &entries[0], &preds(&entries[0].id, &["assert value == 30"]), &cfg).unwrap();
    assert_eq!(report.verdict, Verdict::Timeout);
    assert!(started.elapsed() < Duration::from_secs(5), "{:?}", started.elapsed());
}

#[test]
fn missing_runner_is_reported() {
    let entries = mine("failing", "failing");
    let ws = Workspace::create(&fixture("failing")).unwrap();
    let cfg = RunnerConfig { command: vec!["assertgen-no-such-runner".into()], ..RunnerConfig::default() };
    let err = run_test(&ws, &entries[0], &preds(&entries[0].id, &["assert True"]), &cfg).unwrap_err();
    assert!(matches!(err, HarnessError::RunnerMissing(_)));
    assert!(err.to_string().starts_with("runner-missing"));
}

const FAKE_SHIM: &str = r#"import json
import os


def pytest_runtest_logreport(report):
    if report.when == "call" and report.failed:
        path = os.environ.get("CLAP_REPORT_PATH", ".clap_report.json")
        with open(path, "w") as f:
            json.dump([{"test_id": report.nodeid, "outcome": "failed",
                        "failures": [{"line": 7, "expected": "'x'", "actual": "'y'", "message": "from report"}]}], f)
"#;

#[test]
fn structured_report_is_preferred() {
    let dir = temp_project("from slow import wait\n\n\ndef test_wait():\n    value = wait(0)\n    assert value == 0\n", "");
    let shim = tempfile::tempdir().unwrap();
    std::fs::write(shim.path().join("clap_shim.py"), FAKE_SHIM).unwrap();
    let entries = assertgen::analyzer::mine_project(dir.path(), &assertgen::analyzer::MineOptions::new("s"))
        .unwrap()
        .entries;
    let ws = Workspace::create(dir.path()).unwrap();
    let e = &entries[0];
    let cfg = RunnerConfig {
        structured: true,
        shim_dir: Some(shim.path().to_path_buf()),
        ..RunnerConfig::default()
    };
    let report = run_test(&ws, e, &preds(&e.id, &["assert value == 1"]), &cfg).unwrap();
    assert_eq!(report.verdict, Verdict::Failed);
    let f = &report.failures[0];
    assert_eq!((f.expected.as_str(), f.actual.as_str(), f.message.as_str()), ("'x'", "'y'", "from report"));

    let plain = run_test(&ws, e, &preds(&e.id, &["assert value == 1"]), &RunnerConfig::default()).unwrap();
    assert_eq!((plain.failures[0].expected.as_str(), plain.failures[0].actual.as_str()), ("1", "0"));
}
