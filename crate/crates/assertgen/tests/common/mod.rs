#![allow(dead_code)]

use std::path::{Path, PathBuf};

use assertgen::analyzer::{extract_asserts, extract_test_methods, mine_project, MineOptions};
use assertgen::core::model::{Flavor, Prediction, PredictionSet, TestAssertEntry};
use assertgen::harness::patch_file;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn mine(rel: &str, project: &str) -> Vec<TestAssertEntry> {
    let opts = MineOptions { revision: Some("fixture".into()), ..MineOptions::new(project) };
    mine_project(&fixture(rel), &opts).unwrap().entries
}

pub fn preds(entry_id: &str, texts: &[&str]) -> PredictionSet {
    PredictionSet {
        entry_id: entry_id.into(),
        round: 1,
        predictions: texts
            .iter()
            .enumerate()
            .map(|(i, t)| Prediction { index: i as u32 + 1, text: (*t).into() })
            .collect(),
        raw_response: String::new(),
    }
}

/// Hand-masked expectation for one test in `shop/tests/test_mask_cases.py`.
pub struct MaskCase {
    pub method: String,
    pub flavor: Flavor,
    pub flags: Vec<String>,
    pub masked: String,
    pub asserts: Vec<String>,
}

pub fn mask_cases() -> Vec<MaskCase> {
    read("mask_cases/expected.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            let method = cols[0].to_string();
            MaskCase {
                flavor: if cols[1] == "library" { Flavor::Library } else { Flavor::Keyword },
                flags: if cols[2] == "-" { vec![] } else { cols[2].split(',').map(String::from).collect() },
                masked: read(&format!("mask_cases/{method}.masked")),
                asserts: read(&format!("mask_cases/{method}.asserts"))
                    .split("\n#---\n")
                    .map(String::from)
                    .collect(),
                method,
            }
        })
        .collect()
}

/// Mismatches between the analyzer and the hand-masked cases.
pub fn mask_case_mismatches() -> Vec<String> {
    let source = read("shop/tests/test_mask_cases.py");
    let tests = extract_test_methods("tests/test_mask_cases.py", &source).unwrap();
    let mut bad = Vec::new();
    for case in mask_cases() {
        let Some(t) = tests.iter().find(|t| t.method_name == case.method) else {
            bad.push(format!("{}: not extracted", case.method));
            continue;
        };
        let (masked, asserts, _) = extract_asserts(t).unwrap();
        let texts: Vec<String> = asserts.iter().map(|a| a.text.clone()).collect();
        if masked != case.masked {
            bad.push(format!("{}: masked source\n{masked}\n!=\n{}", case.method, case.masked));
        }
        if texts != case.asserts {
            bad.push(format!("{}: asserts {texts:?} != {:?}", case.method, case.asserts));
        }
        if t.flavor != case.flavor {
            bad.push(format!("{}: flavor {:?}", case.method, t.flavor));
        }
    }
    bad
}

/// Files that do not come back byte-identical after splicing the ground truth
/// of each entry back into them. Returns (entries checked, failures).
pub fn round_trip_failures(rel_root: &str, entries: &[TestAssertEntry]) -> (usize, Vec<String>) {
    let mut bad = Vec::new();
    for e in entries {
        let path = fixture(rel_root).join(&e.file_path);
        let original = std::fs::read_to_string(&path).unwrap();
        let truth: Vec<&str> = e.asserts.iter().map(|a| a.text.as_str()).collect();
        match patch_file(e, &preds(&e.id, &truth), &original) {
            Ok(p) if p.contents == original => {}
            Ok(_) => bad.push(format!("{}: spliced file differs", e.id)),
            Err(err) => bad.push(format!("{}: {err}", e.id)),
        }
    }
    (entries.len(), bad)
}

/// Hand-recorded (test, line, expected, actual, message) for the failing fixture.
pub fn failing_truth() -> Vec<(String, usize, String, String, String)> {
    read("failing/expected.tsv")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            (c[0].into(), c[1].parse().unwrap(), c[2].into(), c[3].into(), c[4].into())
        })
        .collect()
}

/// Text-mode parse of each captured output compared with the recorded truth.
pub fn failing_output_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for (test, line, expected, actual, message) in failing_truth() {
        let raw = read(&format!("failing/outputs/{test}.txt"));
        let f = assertgen::harness::parse_text(&raw, Some("tests/test_failing.py"));
        let got = (f.line, f.expected.as_str(), f.actual.as_str(), f.message.as_str());
        let want = (Some(line), expected.as_str(), actual.as_str(), message.as_str());
        if got != want {
            bad.push(format!("{test}: got {got:?}, want {want:?}"));
        }
    }
    bad
}
