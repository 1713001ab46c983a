use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{accurate_match, assert_method_match, edit_distance, lcs_percent, EquivalenceTable, LcsUnit};
use crate::model::{Flavor, GenerationRecord, TestAssertEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Single,
    Multi,
}

impl Arity {
    pub fn of(entry: &TestAssertEntry) -> Self {
        if entry.is_multi_assert() {
            Arity::Multi
        } else {
            Arity::Single
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arity::Single => "single",
            Arity::Multi => "multi",
        }
    }
}

/// Aggregate scores over some set of tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// Library-flavor asserts scored for AMM.
    pub n: usize,
    pub tests: usize,
    pub asserts: usize,
    /// Assert-level accurate match.
    pub am_pct: f64,
    /// Tests whose every assert matched.
    pub am_test_pct: f64,
    pub lcs_pct: f64,
    pub ed_mean: f64,
    /// Absent when no library-flavor asserts were scored.
    pub amm_pct: Option<f64>,
    pub mean_orig_len: f64,
    pub mean_pred_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub project: String,
    pub flavor: Flavor,
    pub asserts: Arity,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub overall: Stats,
    /// Records whose entry was missing from the dataset.
    pub skipped: usize,
    pub slices: Vec<SliceSummary>,
}

impl MetricsSummary {
    pub fn n(&self) -> usize {
        self.overall.n
    }
    pub fn am_pct(&self) -> f64 {
        self.overall.am_pct
    }
    pub fn lcs_pct(&self) -> f64 {
        self.overall.lcs_pct
    }
    pub fn ed_mean(&self) -> f64 {
        self.overall.ed_mean
    }
    pub fn amm_pct(&self) -> Option<f64> {
        self.overall.amm_pct
    }
}

#[derive(Debug, Default, Clone)]
struct Acc {
    tests: usize,
    tests_matched: usize,
    asserts: usize,
    am: usize,
    lcs_sum: f64,
    ed_sum: usize,
    amm_n: usize,
    amm_hits: usize,
    orig_len: usize,
    pred_len: usize,
}

struct Scored {
    am: bool,
    lcs: f64,
    ed: usize,
    amm: Option<bool>,
    orig_len: usize,
    pred_len: usize,
}

impl Acc {
    fn add_test(&mut self, scores: &[Scored]) {
        self.tests += 1;
        if scores.iter().all(|s| s.am) {
            self.tests_matched += 1;
        }
        for s in scores {
            self.asserts += 1;
            self.am += usize::from(s.am);
            self.lcs_sum += s.lcs;
            self.ed_sum += s.ed;
            self.orig_len += s.orig_len;
            self.pred_len += s.pred_len;
            if let Some(hit) = s.amm {
                self.amm_n += 1;
                self.amm_hits += usize::from(hit);
            }
        }
    }

    fn finish(&self) -> Stats {
        let per = |x: f64, d: usize| if d == 0 { 0.0 } else { x / d as f64 };
        Stats {
            n: self.amm_n,
            tests: self.tests,
            asserts: self.asserts,
            am_pct: per(self.am as f64 * 100.0, self.asserts),
            am_test_pct: per(self.tests_matched as f64 * 100.0, self.tests),
            lcs_pct: per(self.lcs_sum, self.asserts),
            ed_mean: per(self.ed_sum as f64, self.asserts),
            amm_pct: (self.amm_n > 0).then(|| per(self.amm_hits as f64 * 100.0, self.amm_n)),
            mean_orig_len: per(self.orig_len as f64, self.asserts),
            mean_pred_len: per(self.pred_len as f64, self.asserts),
        }
    }
}

/// Scores each record's final predictions against its entry's ground truth.
///
/// A placeholder without a prediction is scored as an empty string.
pub fn summarize<'a>(
    records: &[GenerationRecord],
    truth: impl Fn(&str) -> Option<&'a TestAssertEntry>,
    table: &EquivalenceTable,
    unit: LcsUnit,
) -> MetricsSummary {
    let mut overall = Acc::default();
    let mut slices: BTreeMap<(String, Flavor, Arity), Acc> = BTreeMap::new();
    let mut skipped = 0;
    for record in records {
        let Some(entry) = truth(&record.entry_id) else {
            skipped += 1;
            continue;
        };
        let scores: Vec<Scored> = entry
            .asserts
            .iter()
            .map(|a| {
                let pred = record
                    .final_predictions
                    .as_ref()
                    .and_then(|p| p.get(a.index))
                    .unwrap_or("");
                Scored {
                    am: accurate_match(pred, &a.text, table),
                    lcs: lcs_percent(pred, &a.text, unit),
                    ed: edit_distance(pred, &a.text),
                    amm: (entry.flavor == Flavor::Library).then(|| assert_method_match(pred, &a.text)),
                    orig_len: a.text.chars().count(),
                    pred_len: pred.chars().count(),
                }
            })
            .collect();
        overall.add_test(&scores);
        slices
            .entry((entry.project.clone(), entry.flavor, Arity::of(entry)))
            .or_default()
            .add_test(&scores);
    }
    MetricsSummary {
        overall: overall.finish(),
        skipped,
        slices: slices
            .into_iter()
            .map(|((project, flavor, asserts), acc)| SliceSummary {
                project,
                flavor,
                asserts,
                stats: acc.finish(),
            })
            .collect(),
    }
}
