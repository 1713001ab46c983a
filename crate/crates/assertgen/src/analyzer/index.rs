use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use tree_sitter::Node;

use super::syntax::{self, find_asserts, library_assert_name, line_end, line_start, named_children, text, TestMethod};
use super::{discover_test_files, is_skipped_dir, is_test_file};

/// A function or method defined outside the test files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Callable {
    pub qualified_name: String,
    pub file_path: String,
    /// Definition including decorators and comments.
    pub source: String,
}

#[derive(Debug, Clone, Default)]
pub struct ProjectIndex {
    pub root_path: PathBuf,
    pub test_files: Vec<PathBuf>,
    pub revision: String,
    callables: BTreeMap<String, Callable>,
    by_name: BTreeMap<String, Vec<String>>,
}

fn module_name(rel: &Path) -> String {
    let mut parts: Vec<String> = rel
        .iter()
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    if let Some(last) = parts.last_mut() {
        if let Some(stem) = last.strip_suffix(".py") {
            *last = stem.to_string();
        }
    }
    if parts.last().is_some_and(|p| p == "__init__") {
        parts.pop();
    }
    parts.join(".")
}

pub(crate) fn rel_string(rel: &Path) -> String {
    rel.iter()
        .map(|p| p.to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Short commit id of the checkout, or "unknown" outside a git work tree.
pub fn revision_of(root: &Path) -> String {
    Command::new("git")
        .arg("-C")
        .arg(root)
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

impl ProjectIndex {
    pub fn build(root: &Path) -> std::io::Result<Self> {
        let test_files = discover_test_files(root)?;
        let mut index = ProjectIndex {
            root_path: root.to_path_buf(),
            test_files,
            revision: revision_of(root),
            ..Default::default()
        };
        let walker = walkdir::WalkDir::new(root)
            .sort_by_file_name()
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
            let name = entry.file_name().to_string_lossy();
            if !entry.file_type().is_file() || !name.ends_with(".py") || is_test_file(&name) {
                continue;
            }
            let Ok(rel) = entry.path().strip_prefix(root) else { continue };
            match std::fs::read_to_string(entry.path()) {
                Ok(src) => index.add_module(rel, &src),
                Err(err) => log::warn!("skipping {}: {err}", entry.path().display()),
            }
        }
        Ok(index)
    }

    /// Indexes every function and method of one module.
    pub fn add_module(&mut self, rel: &Path, source: &str) {
        let Some(tree) = syntax::parse(source) else { return };
        let module = module_name(rel);
        let file = rel_string(rel);
        self.add_block(tree.root_node(), source, &module, &file);
    }

    fn add_block(&mut self, block: Node, src: &str, prefix: &str, file: &str) {
        for child in named_children(block) {
            let def = match child.kind() {
                "decorated_definition" => match child.child_by_field_name("definition") {
                    Some(d) => d,
                    None => continue,
                },
                _ => child,
            };
            let Some(name) = def.child_by_field_name("name") else { continue };
            let name = text(name, src);
            let qualified = if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
            match def.kind() {
                "function_definition" => {
                    let start = line_start(src, child.start_byte());
                    let end = line_end(src, child.end_byte());
                    self.insert(Callable {
                        qualified_name: qualified,
                        file_path: file.to_string(),
                        source: src[start..end].to_string(),
                    });
                }
                "class_definition" => {
                    if let Some(body) = def.child_by_field_name("body") {
                        self.add_block(body, src, &qualified, file);
                    }
                }
                _ => {}
            }
        }
    }

    fn insert(&mut self, c: Callable) {
        let short = c.qualified_name.rsplit('.').next().unwrap_or_default().to_string();
        let names = self.by_name.entry(short).or_default();
        if !names.contains(&c.qualified_name) {
            names.push(c.qualified_name.clone());
            names.sort();
        }
        self.callables.entry(c.qualified_name.clone()).or_insert(c);
    }

    pub fn defined_callables(&self) -> impl Iterator<Item = &str> {
        self.callables.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.callables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.callables.is_empty()
    }

    /// The definition a bare name resolves to; the smallest qualified name wins.
    pub fn resolve(&self, name: &str) -> Option<&Callable> {
        let qualified = self.by_name.get(name)?.first()?;
        self.callables.get(qualified)
    }
}

/// Final identifier of a call's target: `f` for `f(...)` and `a.b.f(...)`.
fn call_name<'s>(call: Node, src: &'s str) -> Option<&'s str> {
    let func = call.child_by_field_name("function")?;
    match func.kind() {
        "identifier" => Some(text(func, src)),
        "attribute" => Some(text(func.child_by_field_name("attribute")?, src)),
        _ => None,
    }
}

fn collect_calls<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    for child in named_children(node) {
        if matches!(child.kind(), "function_definition" | "class_definition" | "decorated_definition") {
            continue;
        }
        if child.kind() == "call" {
            out.push(child);
        }
        collect_calls(child, out);
    }
}

/// Last project-defined call before the first assert, else the last one
/// inside an assert.
pub fn identify_focal_method<'i>(test: &TestMethod, index: &'i ProjectIndex) -> Option<&'i Callable> {
    let (tree, wrapped, shift) = syntax::parse_definition(&test.body_source)?;
    let func = syntax::find_function(tree.root_node())?;
    let body = func.child_by_field_name("body")?;
    let asserts = find_asserts(&test.body_source)?;
    let first_assert = asserts.first().map_or(usize::MAX, |a| a.start + shift);

    let mut calls = Vec::new();
    collect_calls(body, &mut calls);
    calls.sort_by_key(|c| (c.end_byte(), c.start_byte()));

    let candidate = |c: &Node| -> Option<&'i Callable> {
        if library_assert_name(*c, &wrapped).is_some() {
            return None;
        }
        let name = call_name(*c, &wrapped)?;
        if name == test.method_name {
            return None;
        }
        index.resolve(name)
    };
    let in_assert = |c: &Node| {
        asserts
            .iter()
            .any(|a| c.start_byte() >= a.start + shift && c.end_byte() <= a.end + shift)
    };
    calls
        .iter()
        .filter(|c| c.end_byte() <= first_assert)
        .rev()
        .find_map(candidate)
        .or_else(|| calls.iter().rev().filter(|c| in_assert(c)).find_map(candidate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::syntax::extract_test_methods;

    fn index(modules: &[(&str, &str)]) -> ProjectIndex {
        let mut idx = ProjectIndex::default();
        for (path, src) in modules {
            idx.add_module(Path::new(path), src);
        }
        idx
    }

    fn focal(idx: &ProjectIndex, test_src: &str) -> Option<String> {
        let tests = extract_test_methods("tests/test_x.py", test_src).unwrap();
        identify_focal_method(&tests[0], idx).map(|c| c.qualified_name.clone())
    }

    const LIB: &str = "\
def f():
    return 1

# helper
@cache
def g(x):
    # doubles
    return 2 * x

class Mw:
    def process_spider_input(self, resp):
        return None
";

    #[test]
    fn qualified_names_and_sources() {
        let idx = index(&[("pkg/mod.py", LIB), ("pkg/__init__.py", "def h(): pass\n")]);
        let names: Vec<_> = idx.defined_callables().collect();
        assert_eq!(names, ["pkg.h", "pkg.mod.Mw.process_spider_input", "pkg.mod.f", "pkg.mod.g"]);
        assert_eq!(
            idx.resolve("g").unwrap().source,
            "@cache\ndef g(x):\n    # doubles\n    return 2 * x"
        );
    }

    #[test]
    fn last_call_before_first_assert() {
        let idx = index(&[("m.py", LIB)]);
        assert_eq!(
            focal(&idx, "def test_a():\n    a = f()\n    b = g(a)\n    assert b == 2\n    f()\n").as_deref(),
            Some("m.g")
        );
        assert_eq!(focal(&idx, "def test_a():\n    x = g(f())\n    assert x\n").as_deref(), Some("m.g"));
    }

    #[test]
    fn falls_back_to_call_inside_assert() {
        let idx = index(&[("m.py", LIB)]);
        let src = "def test_p(m, resp):\n    assert m.process_spider_input(resp) is None\n";
        assert_eq!(focal(&idx, src).as_deref(), Some("m.Mw.process_spider_input"));
    }

    #[test]
    fn unknown_calls_give_nothing() {
        let idx = index(&[("m.py", LIB)]);
        assert_eq!(focal(&idx, "def test_q():\n    x = len([])\n    assert x == 0\n"), None);
    }

    #[test]
    fn module_names() {
        assert_eq!(module_name(Path::new("a/b/c.py")), "a.b.c");
        assert_eq!(module_name(Path::new("a/__init__.py")), "a");
    }
}
