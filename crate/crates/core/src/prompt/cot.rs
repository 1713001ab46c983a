//! Mechanically filled chain-of-thought sections.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lexer::{self, Token, TokenKind};
use crate::model::{AssertStatement, TestAssertEntry};
use crate::placeholder::{self, placeholder};

/// Whether the ground truth may appear in the rationale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CotMode {
    /// Worked example: all three steps filled from the ground truth.
    Sample,
    /// Query target: steps 2 and 3 stay instructions.
    Target,
}

/// One block per placeholder, in placeholder order.
pub fn generate_cot(entry: &TestAssertEntry, mode: CotMode) -> String {
    let focal = entry.focal_method_name();
    let indents: Vec<_> = placeholder::scan(&entry.masked_test_source);
    let mut blocks = Vec::with_capacity(entry.asserts.len());
    for a in &entry.asserts {
        let mut block = format!(
            "{}:\nStep 1: The test method is {} and the focal method is {}.\n",
            placeholder(a.index),
            entry.method_name,
            focal
        );
        match mode {
            CotMode::Sample => {
                let (param, kind) = describe(a);
                let param = match param {
                    Some(p) => format!("The parameter being tested is `{p}`"),
                    None => String::from("No single parameter is singled out"),
                };
                let indent = indents
                    .iter()
                    .find(|s| s.index == a.index)
                    .map_or("", |s| s.indent.as_str());
                block.push_str(&format!("Step 2: {param} and the assert type is {kind}.\n"));
                block.push_str(&format!(
                    "Step 3: Reasoning about the expected value gives the assert statement: {}",
                    placeholder::dedent_continuation(&a.text, indent)
                ));
            }
            CotMode::Target => {
                block.push_str(
                    "Step 2: Determine the parameters being tested and the assert type.\n\
                     Step 3: Reason about the assert value and generate the assert statement.",
                );
            }
        }
        blocks.push(block);
    }
    blocks.join("\n\n")
}

/// Tested parameter (if any) and a phrase naming the assert type.
pub fn describe(a: &AssertStatement) -> (Option<String>, String) {
    if a.is_keyword() {
        describe_keyword(&a.text)
    } else {
        let param = a.arg_texts.first().cloned();
        let kind = format!("{} ({})", library_kind_phrase(&a.method_kind), a.method_kind);
        (param, kind)
    }
}

fn library_kind_phrase(kind: &str) -> &'static str {
    match kind {
        "assertEqual" | "assertEquals" => "equality",
        "assertNotEqual" | "assertNotEquals" => "inequality",
        "assertAlmostEqual" | "assertAlmostEquals" => "approximate equality",
        "assertNotAlmostEqual" => "approximate inequality",
        "assertTrue" => "a truthiness check",
        "assertFalse" => "a falsiness check",
        "assertIs" => "identity",
        "assertIsNot" => "non-identity",
        "assertIsNone" => "a None check",
        "assertIsNotNone" => "a not-None check",
        "assertIn" => "membership",
        "assertNotIn" => "non-membership",
        "assertIsInstance" => "a type/instance check",
        "assertNotIsInstance" => "a negative type/instance check",
        "assertRaises" | "assertRaisesRegex" | "assertRaisesRegexp" => "an expected exception",
        "assertWarns" | "assertWarnsRegex" => "an expected warning",
        "assertLogs" | "assertNoLogs" => "a logging check",
        "assertGreater" | "assertGreaterEqual" | "assertLess" | "assertLessEqual" => {
            "an ordering comparison"
        }
        "assertLen" => "a length (structural) check",
        "assertCountEqual" | "assertListEqual" | "assertDictEqual" | "assertSetEqual"
        | "assertTupleEqual" | "assertSequenceEqual" | "assertMultiLineEqual" => {
            "structural equality"
        }
        "assertRegex" | "assertNotRegex" | "assertRegexpMatches" => "a pattern match",
        _ => "a library assertion",
    }
}

const COMPARISONS: &[(&str, &str)] = &[
    ("==", "equality"),
    ("!=", "inequality"),
    ("is not", "non-identity"),
    ("is", "identity"),
    ("not in", "non-membership"),
    ("in", "membership"),
    ("<=", "ordering"),
    (">=", "ordering"),
    ("<", "ordering"),
    (">", "ordering"),
];

fn slice<'a>(text: &'a str, toks: &[Token<'_>]) -> &'a str {
    match (toks.first(), toks.last()) {
        (Some(f), Some(l)) => &text[f.start..l.end()],
        _ => "",
    }
}

/// Finds the first top-level comparison operator: `(position, width in tokens, op)`.
pub(crate) fn top_level_comparison(toks: &[Token<'_>]) -> Option<(usize, usize, &'static str)> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate() {
        match (t.kind, t.text) {
            (TokenKind::Op, "(" | "[" | "{") => depth += 1,
            (TokenKind::Op, ")" | "]" | "}") => depth -= 1,
            _ if depth != 0 || i == 0 => {}
            (TokenKind::Name, "is") if toks.get(i + 1).is_some_and(|n| n.is_name("not")) => {
                return Some((i, 2, "is not"));
            }
            (TokenKind::Name, "not") if toks.get(i + 1).is_some_and(|n| n.is_name("in")) => {
                return Some((i, 2, "not in"));
            }
            (TokenKind::Name, "is") => return Some((i, 1, "is")),
            (TokenKind::Name, "in") => return Some((i, 1, "in")),
            (TokenKind::Op, op) => {
                if let Some((c, _)) = COMPARISONS.iter().find(|(c, _)| *c == op) {
                    return Some((i, 1, c));
                }
            }
            _ => {}
        }
    }
    None
}

fn describe_keyword(text: &str) -> (Option<String>, String) {
    let Ok(toks) = lexer::code_tokens(text) else {
        return (None, String::from("a keyword assertion"));
    };
    let body = toks.get(1..).unwrap_or(&[]);
    let expr = lexer::split_top_level(body, ",")[0];
    if let Some((at, _, op)) = top_level_comparison(expr) {
        let name = COMPARISONS.iter().find(|(c, _)| *c == op).map_or("", |(_, n)| *n);
        let left = slice(text, &expr[..at]);
        return (
            Some(String::from(left)),
            format!("the comparison operator `{op}` ({name})"),
        );
    }
    if expr.first().is_some_and(|t| t.is_name("not")) {
        return (
            Some(String::from(slice(text, &expr[1..]))),
            String::from("a falsiness check (`not`)"),
        );
    }
    if expr.first().is_some_and(|t| t.is_name("isinstance")) && expr.len() > 2 {
        let inner = &expr[2..expr.len() - 1];
        let first = lexer::split_top_level(inner, ",")[0];
        return (
            Some(String::from(slice(text, first))),
            String::from("a type/instance check (isinstance)"),
        );
    }
    (
        Some(String::from(slice(text, expr))).filter(|s| !s.is_empty()),
        String::from("a truthiness check"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib(kind: &str, text: &str, args: &[&str]) -> AssertStatement {
        AssertStatement {
            index: 1,
            text: text.into(),
            method_kind: kind.into(),
            arg_texts: args.iter().map(|s| String::from(*s)).collect(),
        }
    }

    fn kw(text: &str) -> AssertStatement {
        lib("assert", text, &[])
    }

    #[test]
    fn library_equality_names_parameter() {
        let (p, k) = describe(&lib("assertEqual", "self.assertEqual(x, 5)", &["x", "5"]));
        assert_eq!(p.as_deref(), Some("x"));
        assert_eq!(k, "equality (assertEqual)");
    }

    #[test]
    fn keyword_names_comparison_operator() {
        let (p, k) = describe(&kw("assert result.count == 3, 'msg'"));
        assert_eq!(p.as_deref(), Some("result.count"));
        assert_eq!(k, "the comparison operator `==` (equality)");
        let (_, k) = describe(&kw("assert x is not None"));
        assert_eq!(k, "the comparison operator `is not` (non-identity)");
        let (p, k) = describe(&kw("assert 'a' not in items"));
        assert_eq!(p.as_deref(), Some("'a'"));
        assert_eq!(k, "the comparison operator `not in` (non-membership)");
    }

    #[test]
    fn keyword_truthiness_forms() {
        assert_eq!(describe(&kw("assert not flag")).1, "a falsiness check (`not`)");
        assert_eq!(describe(&kw("assert isinstance(v, int)")).0.as_deref(), Some("v"));
        assert_eq!(describe(&kw("assert ok")).1, "a truthiness check");
    }

    #[test]
    fn nested_comparisons_are_not_top_level() {
        let toks = lexer::code_tokens("f(a == b)").unwrap();
        assert_eq!(top_level_comparison(&toks), None);
    }
}
