//! Reading the numbered "Generated Assertions" list out of a model reply.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lexer;
use crate::model::{Prediction, PredictionSet};

pub const SECTION_TITLE: &str = "Generated Assertions";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed-response: {reason}")]
pub struct MalformedResponse {
    pub reason: String,
    pub raw: String,
}

/// Renders `1. stmt` lines; continuation lines follow their item verbatim.
pub fn format_assertion_list<'a>(items: impl IntoIterator<Item = (u32, &'a str)>) -> String {
    items
        .into_iter()
        .map(|(i, t)| format!("{i}. {t}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_heading(line: &str) -> Option<&str> {
    let t = line.trim_start_matches(|c: char| c.is_whitespace() || c == '#' || c == '*');
    let lower_ok = t.len() >= SECTION_TITLE.len()
        && t.is_char_boundary(SECTION_TITLE.len())
        && t[..SECTION_TITLE.len()].eq_ignore_ascii_case(SECTION_TITLE);
    if !lower_ok {
        return None;
    }
    let rest = t[SECTION_TITLE.len()..].trim_start_matches(['*', ':']);
    Some(rest.trim())
}

/// `k. stmt`, `k) stmt`, `- k. stmt`; returns `(k, stmt)`.
fn numbered_item(line: &str) -> Option<(u32, &str)> {
    let t = line.trim_start();
    let t = t
        .strip_prefix("- ")
        .or_else(|| t.strip_prefix("* "))
        .unwrap_or(t)
        .trim_start();
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &t[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let k = t[..digits].parse().ok()?;
    Some((k, rest.trim()))
}

fn strip_inline_code(s: &str) -> &str {
    let s = s.trim();
    match s.strip_prefix('`').and_then(|r| r.strip_suffix('`')) {
        Some(inner) if !inner.contains('`') => inner.trim(),
        _ => s,
    }
}

fn continues(current: &str, line: &str) -> bool {
    if lexer::open_brackets(current) > 0 {
        return true;
    }
    let first = current.lines().next().unwrap_or("").trim_end();
    let last = current.lines().last().unwrap_or("").trim_end();
    last.ends_with('\\')
        || last.ends_with(':')
        || (first.ends_with(':') && line.starts_with(char::is_whitespace))
}

/// Parses the last "Generated Assertions" section of `raw` into exactly
/// `expected_count` predictions ordered by placeholder index.
pub fn parse_predictions(
    raw: &str,
    expected_count: usize,
    entry_id: &str,
    round: u32,
) -> Result<PredictionSet, MalformedResponse> {
    let malformed = |reason: String| MalformedResponse { reason, raw: String::from(raw) };
    let lines: Vec<&str> = raw.lines().collect();
    let Some(start) = lines.iter().rposition(|l| is_heading(l).is_some()) else {
        return Err(malformed(format!("no \"{SECTION_TITLE}\" section")));
    };
    let mut body: Vec<&str> = Vec::new();
    if let Some(inline) = is_heading(lines[start]).filter(|r| !r.is_empty()) {
        body.push(inline);
    }
    body.extend(&lines[start + 1..]);

    let mut items: Vec<(u32, String)> = Vec::new();
    for line in body {
        let line = line.trim_end();
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if let Some(current) = items.last_mut() {
            if numbered_item(line).is_none() && continues(&current.1, line) {
                current.1.push('\n');
                current.1.push_str(line);
                continue;
            }
        }
        match numbered_item(line) {
            Some((k, stmt)) => items.push((k, String::from(strip_inline_code(stmt)))),
            None if items.is_empty() => continue,
            None => break,
        }
    }

    if items.len() != expected_count {
        return Err(malformed(format!(
            "expected {expected_count} assertions, found {}",
            items.len()
        )));
    }
    items.sort_by_key(|(k, _)| *k);
    for (pos, (k, _)) in items.iter().enumerate() {
        if *k as usize != pos + 1 {
            return Err(malformed(format!(
                "assertion numbers must be exactly 1..{expected_count} (found {k})"
            )));
        }
    }
    Ok(PredictionSet {
        entry_id: String::from(entry_id),
        round,
        predictions: items
            .into_iter()
            .map(|(index, text)| Prediction { index, text })
            .collect(),
        raw_response: String::from(raw),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn texts(set: &PredictionSet) -> Vec<(u32, &str)> {
        set.predictions.iter().map(|p| (p.index, p.text.as_str())).collect()
    }

    #[test]
    fn single_item() {
        let set = parse_predictions("Generated Assertions:\n1. assert x == 1", 1, "e", 1).unwrap();
        assert_eq!(texts(&set), [(1, "assert x == 1")]);
        assert_eq!(set.round, 1);
    }

    #[test]
    fn prose_then_three_items() {
        let raw = "Chain of Thoughts:\n<AssertPlaceholder1>: step...\n\n\
                   **Generated Assertions:**\n```python\n\
                   1. self.assertEqual(a, 1)\n2) self.assertTrue(b)\n- 3. `self.assertIn(c, d)`\n```\n\
                   Let me know if you need more.";
        let set = parse_predictions(raw, 3, "e", 1).unwrap();
        assert_eq!(
            texts(&set),
            [(1, "self.assertEqual(a, 1)"), (2, "self.assertTrue(b)"), (3, "self.assertIn(c, d)")]
        );
    }

    #[test]
    fn last_section_wins() {
        let raw = "Generated Assertions:\n1. assert a\n\nRevised.\nGenerated Assertions:\n1. assert b";
        assert_eq!(texts(&parse_predictions(raw, 1, "e", 2).unwrap()), [(1, "assert b")]);
    }

    #[test]
    fn count_mismatch_is_malformed() {
        let raw = "Generated Assertions:\n1. assert a\n2. assert b";
        let err = parse_predictions(raw, 3, "e", 1).unwrap_err();
        assert!(err.reason.contains("expected 3"));
        assert_eq!(err.raw, raw);
    }

    #[test]
    fn duplicate_numbers_are_malformed() {
        let raw = "Generated Assertions:\n1. assert a\n1. assert b";
        assert!(parse_predictions(raw, 2, "e", 1).is_err());
    }

    #[test]
    fn missing_section_is_malformed() {
        assert!(parse_predictions("1. assert a", 1, "e", 1).is_err());
    }

    #[test]
    fn multi_line_items() {
        let raw = "Generated Assertions:\n1. self.assertEqual(\n    f(x),\n    3)\n\
                   2. with self.assertRaises(ValueError):\n    f(None)\n3. assert y";
        let set = parse_predictions(raw, 3, "e", 1).unwrap();
        assert_eq!(set.predictions[0].text, "self.assertEqual(\n    f(x),\n    3)");
        assert_eq!(set.predictions[1].text, "with self.assertRaises(ValueError):\n    f(None)");
        assert_eq!(set.predictions[2].text, "assert y");
    }

    #[test]
    fn inline_item_on_heading_line() {
        let set = parse_predictions("Generated Assertions: 1. assert z", 1, "e", 1).unwrap();
        assert_eq!(texts(&set), [(1, "assert z")]);
    }

    fn statement() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z]{1,6}".prop_map(|v| format!("assert {v} == 1")),
            ("[a-z]{1,6}", "[0-9]{1,3}").prop_map(|(a, b)| format!("self.assertEqual({a}, {b})")),
            "[a-z]{1,6}".prop_map(|v| format!("self.assertIn(\n    {v},\n    items)")),
            "[A-Z][a-z]{1,6}".prop_map(|e| format!("with self.assertRaises({e}):\n    call()")),
        ]
    }

    proptest! {
        #[test]
        fn parse_inverts_format(stmts in proptest::collection::vec(statement(), 1..6)) {
            let items: Vec<(u32, &str)> =
                stmts.iter().enumerate().map(|(i, s)| (i as u32 + 1, s.as_str())).collect();
            let raw = format!("Some reasoning.\n\nGenerated Assertions:\n{}\n", format_assertion_list(items.clone()));
            let set = parse_predictions(&raw, stmts.len(), "e", 1).unwrap();
            prop_assert_eq!(texts(&set), items);
        }
    }

    #[test]
    fn format_list() {
        let s = format_assertion_list(vec![(1, "a"), (2, "b")]);
        assert_eq!(s, "1. a\n2. b".to_string());
    }
}
