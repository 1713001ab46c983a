//! Summary rows on disk and their text table.

use serde::{Deserialize, Serialize};

use assertgen_core::metrics::{Arity, MetricsSummary, Stats};
use assertgen_core::model::Flavor;

use crate::pipeline::Filters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Overall,
    Slice,
}

/// One line of a summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<Flavor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<Arity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<usize>,
    #[serde(flatten)]
    pub stats: Stats,
}

/// Overall line first, then one line per slice.
pub fn summary_rows(summary: &MetricsSummary) -> Vec<SummaryRow> {
    let mut rows = vec![SummaryRow {
        scope: Scope::Overall,
        project: None,
        flavor: None,
        arity: None,
        skipped: Some(summary.skipped),
        stats: summary.overall.clone(),
    }];
    rows.extend(summary.slices.iter().map(|s| SummaryRow {
        scope: Scope::Slice,
        project: Some(s.project.clone()),
        flavor: Some(s.flavor),
        arity: Some(s.asserts),
        skipped: None,
        stats: s.stats.clone(),
    }));
    rows
}

const HEADERS: [&str; 10] = ["project", "flavor", "arity", "tests", "asserts", "AM%", "AM(test)%", "LCS%", "ED", "AMM%"];

fn row_cells(row: &SummaryRow) -> [String; 10] {
    let s = &row.stats;
    let or_all = |v: Option<String>| v.unwrap_or_else(|| "(all)".into());
    [
        or_all(row.project.clone()),
        or_all(row.flavor.map(|f| f.to_string())),
        or_all(row.arity.map(|a| a.as_str().to_string())),
        s.tests.to_string(),
        s.asserts.to_string(),
        format!("{:.2}", s.am_pct),
        format!("{:.2}", s.am_test_pct),
        format!("{:.2}", s.lcs_pct),
        format!("{:.2}", s.ed_mean),
        s.amm_pct.map_or_else(|| "-".into(), |v| format!("{v:.2}")),
    ]
}

fn keep(row: &SummaryRow, filters: &Filters) -> bool {
    if filters == &Filters::default() {
        return true;
    }
    row.scope == Scope::Slice
        && filters.project.as_ref().is_none_or(|p| row.project.as_ref() == Some(p))
        && filters.flavor.is_none_or(|f| row.flavor == Some(f))
        && filters.asserts.is_none_or(|a| row.arity == Some(a))
}

/// Aligned text table; header only when no row survives the filters.
pub fn render_table(rows: &[SummaryRow], filters: &Filters) -> String {
    let body: Vec<[String; 10]> = rows.iter().filter(|r| keep(r, filters)).map(row_cells).collect();
    let mut widths = HEADERS.map(str::len);
    for cells in &body {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i < 3 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&HEADERS.map(String::from));
    out.push('\n');
    for cells in &body {
        out.push_str(&line(cells));
        out.push('\n');
    }
    out
}
