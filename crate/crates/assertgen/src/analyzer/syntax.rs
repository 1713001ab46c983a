//! Tree-sitter views of Python source.

use tree_sitter::{Node, Parser, Tree};

use assertgen_core::model::{AssertStatement, Flavor, KEYWORD_KIND};

pub(crate) fn parse(source: &str) -> Option<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar is compatible");
    parser.parse(source, None)
}

/// Whether `source` parses as Python without error nodes.
pub fn is_valid_python(source: &str) -> bool {
    parse(source).is_some_and(|t| !t.root_node().has_error())
}

pub(crate) fn text<'s>(node: Node, src: &'s str) -> &'s str {
    &src[node.byte_range()]
}

pub(crate) fn line_start(src: &str, at: usize) -> usize {
    src[..at].rfind('\n').map_or(0, |i| i + 1)
}

pub(crate) fn line_end(src: &str, at: usize) -> usize {
    src[at..].find('\n').map_or(src.len(), |i| at + i)
}

pub(crate) fn named_children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

/// A test function found in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestMethod {
    pub file_path: String,
    /// Enclosing classes joined by `.`.
    pub class_name: Option<String>,
    pub method_name: String,
    /// Whole definition, from the start of its first line to the end of its last.
    pub body_source: String,
    pub start_line: usize,
    pub end_line: usize,
    pub start_byte: usize,
    pub end_byte: usize,
    pub flavor: Flavor,
    pub decorated: bool,
}

impl TestMethod {
    /// pytest node selector relative to the project root.
    pub fn node_id(&self) -> String {
        node_id(&self.file_path, self.class_name.as_deref(), &self.method_name)
    }
}

pub fn node_id(file_path: &str, class_name: Option<&str>, method_name: &str) -> String {
    let mut id = String::from(file_path);
    if let Some(class) = class_name {
        for part in class.split('.') {
            id.push_str("::");
            id.push_str(part);
        }
    }
    id.push_str("::");
    id.push_str(method_name);
    id
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse-error: {0} does not parse as Python")]
pub struct SyntaxError(pub String);

fn is_testcase_class(class: Node, src: &str) -> bool {
    let Some(bases) = class.child_by_field_name("superclasses") else {
        return false;
    };
    named_children(bases).into_iter().any(|b| {
        let t = text(b, src);
        let last = t.rsplit('.').next().unwrap_or(t);
        last.trim().ends_with("TestCase")
    })
}

struct Walk<'a> {
    file_path: &'a str,
    src: &'a str,
    out: Vec<TestMethod>,
}

impl Walk<'_> {
    fn block(&mut self, block: Node, classes: &mut Vec<String>, testcase: bool) {
        for child in named_children(block) {
            let (def, decorated) = match child.kind() {
                "decorated_definition" => match child.child_by_field_name("definition") {
                    Some(d) => (d, true),
                    None => continue,
                },
                _ => (child, false),
            };
            match def.kind() {
                "class_definition" => {
                    let Some(name) = def.child_by_field_name("name") else { continue };
                    let Some(body) = def.child_by_field_name("body") else { continue };
                    classes.push(text(name, self.src).to_string());
                    let tc = testcase || is_testcase_class(def, self.src);
                    self.block(body, classes, tc);
                    classes.pop();
                }
                "function_definition" => {
                    let Some(name) = def.child_by_field_name("name") else { continue };
                    let name = text(name, self.src);
                    if name.starts_with("test") {
                        self.method(child, def, name, classes, testcase, decorated);
                    }
                }
                _ => {}
            }
        }
    }

    fn method(
        &mut self,
        outer: Node,
        def: Node,
        name: &str,
        classes: &[String],
        testcase: bool,
        decorated: bool,
    ) {
        let start = line_start(self.src, outer.start_byte());
        let end = line_end(self.src, outer.end_byte());
        let body_source = self.src[start..end].to_string();
        let library = testcase || uses_library_asserts(def, self.src);
        self.out.push(TestMethod {
            file_path: self.file_path.to_string(),
            class_name: (!classes.is_empty()).then(|| classes.join(".")),
            method_name: name.to_string(),
            body_source,
            start_line: outer.start_position().row + 1,
            end_line: outer.end_position().row + 1,
            start_byte: start,
            end_byte: end,
            flavor: if library { Flavor::Library } else { Flavor::Keyword },
            decorated,
        });
    }
}

fn uses_library_asserts(def: Node, src: &str) -> bool {
    let mut found = false;
    visit(def, &mut |n| {
        if n.kind() == "call" && library_assert_name(n, src).is_some() {
            found = true;
        }
    });
    found
}

fn visit<'t>(node: Node<'t>, f: &mut impl FnMut(Node<'t>)) {
    f(node);
    for c in named_children(node) {
        visit(c, f);
    }
}

/// Every `test*` function at module level or inside (nested) classes.
pub fn extract_test_methods(file_path: &str, source: &str) -> Result<Vec<TestMethod>, SyntaxError> {
    let tree = parse(source).ok_or_else(|| SyntaxError(file_path.to_string()))?;
    let root = tree.root_node();
    if root.has_error() {
        return Err(SyntaxError(file_path.to_string()));
    }
    let mut walk = Walk { file_path, src: source, out: Vec::new() };
    walk.block(root, &mut Vec::new(), false);
    Ok(walk.out)
}

/// `assertX` when `call` is `self.assertX(...)` with an upper-case letter after `assert`.
pub(crate) fn library_assert_name<'s>(call: Node, src: &'s str) -> Option<&'s str> {
    let func = call.child_by_field_name("function")?;
    if func.kind() != "attribute" {
        return None;
    }
    let object = func.child_by_field_name("object")?;
    let attr = text(func.child_by_field_name("attribute")?, src);
    let rest = attr.strip_prefix("assert")?;
    (text(object, src) == "self" && rest.starts_with(|c: char| c.is_ascii_uppercase())).then_some(attr)
}

fn call_args(call: Node, src: &str) -> Vec<String> {
    call.child_by_field_name("arguments")
        .map(|args| {
            named_children(args)
                .into_iter()
                .filter(|a| a.kind() != "comment")
                .map(|a| text(a, src).to_string())
                .collect()
        })
        .unwrap_or_default()
}

/// The `self.assert*` call a `with` statement manages, if it is its only item.
fn with_assert_call(stmt: Node) -> Option<Node> {
    let clause = named_children(stmt).into_iter().find(|c| c.kind() == "with_clause")?;
    let items = named_children(clause);
    let [item] = items.as_slice() else { return None };
    let mut value = item.child_by_field_name("value")?;
    if value.kind() == "as_pattern" {
        value = value.named_child(0)?;
    }
    (value.kind() == "call").then_some(value)
}

/// A masked statement: byte range in the parsed text plus its description.
#[derive(Debug, Clone)]
pub(crate) struct Found {
    pub start: usize,
    pub end: usize,
    pub method_kind: String,
    pub arg_texts: Vec<String>,
    pub nested: bool,
}

fn classify(stmt: Node, src: &str) -> Option<(String, Vec<String>)> {
    match stmt.kind() {
        "assert_statement" => Some((KEYWORD_KIND.to_string(), Vec::new())),
        "expression_statement" => {
            let children = named_children(stmt);
            let [call] = children.as_slice() else { return None };
            if call.kind() != "call" {
                return None;
            }
            let name = library_assert_name(*call, src)?;
            Some((name.to_string(), call_args(*call, src)))
        }
        "with_statement" => {
            let call = with_assert_call(stmt)?;
            let name = library_assert_name(call, src)?;
            Some((name.to_string(), call_args(call, src)))
        }
        _ => None,
    }
}

const NESTING: &[&str] = &[
    "if_statement",
    "for_statement",
    "while_statement",
    "try_statement",
    "match_statement",
];

fn collect_asserts(node: Node, src: &str, nested: bool, out: &mut Vec<Found>) {
    for child in named_children(node) {
        match child.kind() {
            "function_definition" | "class_definition" | "decorated_definition" => continue,
            _ => {}
        }
        if let Some((method_kind, arg_texts)) = classify(child, src) {
            out.push(Found {
                start: child.start_byte(),
                end: child.end_byte(),
                method_kind,
                arg_texts,
                nested,
            });
            continue;
        }
        let deeper = nested || NESTING.contains(&child.kind());
        if child.kind().ends_with("_statement")
            || child.kind().ends_with("_clause")
            || child.kind() == "block"
        {
            collect_asserts(child, src, deeper, out);
        }
    }
}

/// Parses a definition that may be indented by wrapping it in a class body.
pub(crate) fn parse_definition(body: &str) -> Option<(Tree, String, usize)> {
    let wrapped = if body.starts_with([' ', '\t']) {
        format!("class _W:\n{body}")
    } else {
        body.to_string()
    };
    let shift = wrapped.len() - body.len();
    let tree = parse(&wrapped)?;
    if tree.root_node().has_error() {
        return None;
    }
    Some((tree, wrapped, shift))
}

pub(crate) fn find_function(root: Node) -> Option<Node> {
    let mut found = None;
    visit(root, &mut |n| {
        if found.is_none() && n.kind() == "function_definition" {
            found = Some(n);
        }
    });
    found
}

/// Asserts of a test definition as byte ranges into `body`.
pub(crate) fn find_asserts(body: &str) -> Option<Vec<Found>> {
    let (tree, wrapped, shift) = parse_definition(body)?;
    let func = find_function(tree.root_node())?;
    let block = func.child_by_field_name("body")?;
    let mut found = Vec::new();
    collect_asserts(block, &wrapped, false, &mut found);
    for f in &mut found {
        f.start -= shift;
        f.end -= shift;
    }
    Some(found)
}

/// Masked body text and its asserts, plus whether any assert is nested in control flow.
pub fn extract_asserts(test: &TestMethod) -> Result<(String, Vec<AssertStatement>, bool), SyntaxError> {
    let found = find_asserts(&test.body_source).ok_or_else(|| SyntaxError(test.node_id()))?;
    let body = &test.body_source;
    let mut masked = String::with_capacity(body.len());
    let mut asserts = Vec::with_capacity(found.len());
    let mut cursor = 0;
    let mut nested = false;
    for (i, f) in found.into_iter().enumerate() {
        let index = i as u32 + 1;
        masked.push_str(&body[cursor..f.start]);
        masked.push_str(&assertgen_core::placeholder::placeholder(index));
        cursor = f.end;
        nested |= f.nested;
        asserts.push(AssertStatement {
            index,
            text: body[f.start..f.end].to_string(),
            method_kind: f.method_kind,
            arg_texts: f.arg_texts,
        });
    }
    masked.push_str(&body[cursor..]);
    Ok((masked, asserts, nested))
}

/// Module-level simple assignments, each through the end of its last line.
pub fn collect_context(source: &str) -> String {
    let Some(tree) = parse(source) else { return String::new() };
    let mut lines = Vec::new();
    for stmt in named_children(tree.root_node()) {
        if stmt.kind() != "expression_statement" {
            continue;
        }
        let children = named_children(stmt);
        if !matches!(children.as_slice(), [a] if a.kind() == "assignment") {
            continue;
        }
        let end = line_end(source, stmt.end_byte());
        lines.push(&source[stmt.start_byte()..end]);
    }
    lines.join("\n")
}
