//! AM, LCS, ED and AMM scoring of predicted asserts.

mod distance;
mod equivalence;
mod normalize;
mod summary;

use alloc::string::String;
use alloc::vec::Vec;

pub use distance::{lcs_len, lcs_ratio_percent, levenshtein};
pub use equivalence::{EquivalenceGroup, EquivalenceTable, Pattern, TableError, DEFAULT_TABLE};
pub use normalize::{normalize, Normalized};
pub use summary::{summarize, Arity, MetricsSummary, SliceSummary, Stats};

use crate::lexer;
use crate::model::KEYWORD_KIND;

/// Unit over which LCS is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LcsUnit {
    #[default]
    Char,
    Token,
}

impl core::str::FromStr for LcsUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(LcsUnit::Char),
            "token" => Ok(LcsUnit::Token),
            other => Err(alloc::format!("unknown LCS unit `{other}` (expected char or token)")),
        }
    }
}

fn raw_tokens(s: &str) -> Vec<&str> {
    match lexer::tokenize(s) {
        Ok(toks) => toks.into_iter().map(|t| t.text).collect(),
        Err(_) => s.split_whitespace().collect(),
    }
}

/// Longest common subsequence of `pred` and `orig` over `orig`'s length, in percent.
pub fn lcs_percent(pred: &str, orig: &str, unit: LcsUnit) -> f64 {
    match unit {
        LcsUnit::Char => {
            let p: Vec<char> = pred.chars().collect();
            let o: Vec<char> = orig.chars().collect();
            lcs_ratio_percent(&p, &o)
        }
        LcsUnit::Token => lcs_ratio_percent(&raw_tokens(pred), &raw_tokens(orig)),
    }
}

/// Character-level Levenshtein distance.
pub fn edit_distance(pred: &str, orig: &str) -> usize {
    let p: Vec<char> = pred.chars().collect();
    let o: Vec<char> = orig.chars().collect();
    levenshtein(&p, &o)
}

/// `"assert"` for keyword asserts, the library method for `self.assert*`
/// calls (also as a `with` context manager), `None` otherwise.
pub fn method_kind(text: &str) -> Option<String> {
    let toks = lexer::code_tokens(text).ok()?;
    let first = toks.first()?;
    if first.is_name(KEYWORD_KIND) {
        return Some(String::from(KEYWORD_KIND));
    }
    let call = if first.is_name("with") { &toks[1..] } else { &toks[..] };
    match call {
        [s, dot, name, paren, ..]
            if s.is_name("self") && dot.is_op(".") && paren.is_op("(")
                && name.text.starts_with("assert") =>
        {
            Some(String::from(name.text))
        }
        _ => None,
    }
}

/// Whether both statements use the same assert method.
pub fn assert_method_match(pred: &str, orig: &str) -> bool {
    match (method_kind(pred), method_kind(orig)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

const SYMMETRIC_KINDS: &[&str] = &["assertEqual", "assertNotEqual"];
const SYMMETRIC_OPS: &[&str] = &["==", "!="];
const COMPARISON_WORDS: &[&str] = &["==", "!=", "<", ">", "<=", ">=", "in", "is"];
const LOOSE_BINDING: &[&str] = &["and", "or", "not", "if", "else", "lambda"];

fn split_top(toks: &[String], sep: &str) -> Vec<Vec<String>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = Vec::new();
    for t in toks {
        match t.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if s == sep && depth == 0 => {
                parts.push(core::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(t.clone());
    }
    parts.push(cur);
    parts
}

fn top_level_positions(toks: &[String], words: &[&str]) -> Vec<usize> {
    let mut depth = 0i32;
    let mut hits = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        match t.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if depth == 0 && words.contains(&s) => hits.push(i),
            _ => {}
        }
    }
    hits
}

/// The statement with the operands of a symmetric check exchanged.
fn swap_symmetric(toks: &[String]) -> Option<Vec<String>> {
    let first = toks.first()?.as_str();
    if first == KEYWORD_KIND {
        let mut parts = split_top(&toks[1..], ",");
        let expr = parts.remove(0);
        let cmp = top_level_positions(&expr, COMPARISON_WORDS);
        let [at] = cmp.as_slice() else { return None };
        let at = *at;
        if !SYMMETRIC_OPS.contains(&expr[at].as_str())
            || !top_level_positions(&expr, LOOSE_BINDING).is_empty()
            || at == 0
            || at + 1 == expr.len()
        {
            return None;
        }
        let mut out = Vec::with_capacity(toks.len());
        out.push(toks[0].clone());
        out.extend_from_slice(&expr[at + 1..]);
        out.push(expr[at].clone());
        out.extend_from_slice(&expr[..at]);
        for rest in parts {
            out.push(String::from(","));
            out.extend(rest);
        }
        return Some(out);
    }
    if toks.len() < 6
        || first != "self"
        || toks[1] != "."
        || !SYMMETRIC_KINDS.contains(&toks[2].as_str())
        || toks[3] != "("
        || toks.last()? != ")"
    {
        return None;
    }
    let inner = &toks[4..toks.len() - 1];
    let mut args = split_top(inner, ",");
    if args.len() < 2 || args[0].is_empty() || args[1].is_empty() {
        return None;
    }
    args.swap(0, 1);
    let mut out: Vec<String> = toks[..4].to_vec();
    for (i, a) in args.into_iter().enumerate() {
        if i > 0 {
            out.push(String::from(","));
        }
        out.extend(a);
    }
    out.push(String::from(")"));
    Some(out)
}

fn forms(toks: &[String], table: &EquivalenceTable) -> Vec<Vec<String>> {
    let canon = table.canonicalize(toks);
    let mut out = Vec::with_capacity(3);
    if let Some(s) = swap_symmetric(&canon) {
        out.push(s);
    }
    if let Some(s) = swap_symmetric(toks) {
        out.push(table.canonicalize(&s));
    }
    out.push(canon);
    out
}

/// Functional-equivalence match: equal normalized tokens, equal after
/// swapping the operands of a symmetric check, or equal after rewriting
/// through the equivalence table.
pub fn accurate_match(pred: &str, orig: &str, table: &EquivalenceTable) -> bool {
    let p = normalize(pred).tokens;
    let o = normalize(orig).tokens;
    if p == o {
        return true;
    }
    if p.is_empty() || o.is_empty() {
        return false;
    }
    let pf = forms(&p, table);
    let of = forms(&o, table);
    pf.iter().any(|a| of.contains(a))
}
