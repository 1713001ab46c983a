//! Equivalence table: groups of assert spellings that check the same thing.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::normalize::normalize;

pub const DEFAULT_TABLE: &str = include_str!("../../data/equivalence.tbl");

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatTok {
    Lit(String),
    Var(String),
}

/// A statement shape with `$name` holes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    source: String,
    toks: Vec<PatTok>,
}

impl Pattern {
    pub fn parse(src: &str) -> Result<Self, TableError> {
        let norm = normalize(src);
        if norm.fallback {
            return Err(TableError::BadPattern(src.to_string()));
        }
        let mut toks = Vec::new();
        let mut it = norm.tokens.into_iter().peekable();
        while let Some(t) = it.next() {
            if t == "$" {
                match it.next() {
                    Some(name) if name.chars().all(|c| c.is_alphanumeric() || c == '_') => {
                        toks.push(PatTok::Var(name))
                    }
                    _ => return Err(TableError::BadPattern(src.to_string())),
                }
            } else {
                toks.push(PatTok::Lit(t));
            }
        }
        Ok(Pattern { source: src.to_string(), toks })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.toks.iter().filter_map(|t| match t {
            PatTok::Var(v) => Some(v.as_str()),
            PatTok::Lit(_) => None,
        })
    }

    /// Binds every hole if the pattern spans all of `toks`.
    fn match_all<'t>(&self, toks: &'t [String]) -> Option<Vec<(&str, &'t [String])>> {
        let mut binds = Vec::new();
        if match_from(&self.toks, toks, &mut binds) {
            Some(binds)
        } else {
            None
        }
    }

    fn instantiate(&self, binds: &[(&str, &[String])]) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.toks {
            match t {
                PatTok::Lit(l) => out.push(l.clone()),
                PatTok::Var(v) => {
                    if let Some((_, val)) = binds.iter().find(|(n, _)| n == v) {
                        out.extend(val.iter().cloned());
                    }
                }
            }
        }
        out
    }
}

const OPENERS: &[&str] = &["(", "[", "{"];
const CLOSERS: &[&str] = &[")", "]", "}"];
/// Operators a hole may not contain at bracket depth zero.
const BINDING_STOPS: &[&str] = &[
    "and", "or", "not", "if", "else", "lambda", "in", "is", "==", "!=", "<", ">", "<=", ">=", ":",
];

fn bindable(toks: &[String]) -> bool {
    let mut depth = 0i32;
    for t in toks {
        let t = t.as_str();
        if OPENERS.contains(&t) {
            depth += 1;
        } else if CLOSERS.contains(&t) {
            depth -= 1;
            if depth < 0 {
                return false;
            }
        } else if depth == 0 && BINDING_STOPS.contains(&t) {
            return false;
        }
    }
    depth == 0
}

fn match_from<'p, 't>(
    pat: &'p [PatTok],
    toks: &'t [String],
    binds: &mut Vec<(&'p str, &'t [String])>,
) -> bool {
    let Some((head, rest)) = pat.split_first() else {
        return toks.is_empty();
    };
    match head {
        PatTok::Lit(l) => toks.first() == Some(l) && match_from(rest, &toks[1..], binds),
        PatTok::Var(v) => {
            if let Some((_, bound)) = binds.iter().find(|(n, _)| n == v) {
                let bound = *bound;
                return toks.starts_with(bound) && match_from(rest, &toks[bound.len()..], binds);
            }
            for end in 1..=toks.len() {
                let candidate = &toks[..end];
                if !bindable(candidate) {
                    continue;
                }
                binds.push((v.as_str(), candidate));
                if match_from(rest, &toks[end..], binds) {
                    return true;
                }
                binds.pop();
            }
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceGroup {
    pub name: String,
    pub kinds: Vec<String>,
    /// Variant spellings.
    pub patterns: Vec<Pattern>,
    /// Canonical spelling.
    pub rewrite: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceTable {
    pub version: String,
    pub groups: Vec<EquivalenceGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("pattern does not lex or has a malformed hole: {0}")]
    BadPattern(String),
    #[error("group `{group}`: {msg}")]
    Group { group: String, msg: String },
}

const MAX_REWRITES: usize = 8;

impl EquivalenceTable {
    /// Parses the block format of `data/equivalence.tbl`.
    pub fn parse(src: &str) -> Result<Self, TableError> {
        struct Draft {
            name: String,
            kinds: Vec<String>,
            patterns: Vec<Pattern>,
            rewrite: Option<Pattern>,
        }
        let mut version = String::from("1");
        let mut drafts: Vec<Draft> = Vec::new();
        for (n, raw) in src.lines().enumerate() {
            let line = raw.trim();
            let syntax = |msg: String| TableError::Syntax { line: n + 1, msg };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                drafts.push(Draft {
                    name: name.trim().to_string(),
                    kinds: Vec::new(),
                    patterns: Vec::new(),
                    rewrite: None,
                });
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(syntax(format!("expected `key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(group) = drafts.last_mut() else {
                if key == "version" {
                    version = value.to_string();
                    continue;
                }
                return Err(syntax(format!("`{key}` outside of a [group]")));
            };
            match key {
                "kinds" => {
                    group.kinds = value
                        .split(',')
                        .map(|k| k.trim().to_string())
                        .filter(|k| !k.is_empty())
                        .collect()
                }
                "pattern" => group.patterns.push(Pattern::parse(value)?),
                "rewrite" => {
                    if group.rewrite.is_some() {
                        return Err(syntax(format!("group `{}` has two rewrites", group.name)));
                    }
                    group.rewrite = Some(Pattern::parse(value)?);
                }
                other => return Err(syntax(format!("unknown key `{other}`"))),
            }
        }
        let mut groups = Vec::with_capacity(drafts.len());
        for d in drafts {
            let err = |msg: &str| TableError::Group { group: d.name.clone(), msg: msg.to_string() };
            let rewrite = d.rewrite.ok_or_else(|| err("missing rewrite"))?;
            if d.patterns.is_empty() {
                return Err(err("needs at least one pattern"));
            }
            for p in &d.patterns {
                if rewrite.vars().any(|v| !p.vars().any(|pv| pv == v)) {
                    return Err(err("rewrite uses a hole some pattern does not bind"));
                }
            }
            groups.push(EquivalenceGroup { name: d.name, kinds: d.kinds, patterns: d.patterns, rewrite });
        }
        Ok(EquivalenceTable { version, groups })
    }

    /// Repeatedly rewrites `toks` through the first matching group until stable.
    pub fn canonicalize(&self, toks: &[String]) -> Vec<String> {
        let mut cur = toks.to_vec();
        for _ in 0..MAX_REWRITES {
            let next = self.groups.iter().find_map(|g| {
                g.patterns
                    .iter()
                    .find_map(|p| p.match_all(&cur))
                    .map(|binds| g.rewrite.instantiate(&binds))
            });
            match next {
                Some(n) if n != cur => cur = n,
                _ => break,
            }
        }
        cur
    }
}

impl Default for EquivalenceTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled equivalence table parses")
    }
}
