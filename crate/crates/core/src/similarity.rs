//! Method-name similarity used to pick the one-shot sample.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Splits an identifier on underscores and camel-case boundaries, lowercased.
///
/// `testSendHTMLMail` gives `test`, `send`, `html`, `mail`.
pub fn name_tokens(name: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for part in name.split(|c: char| c == '_' || !c.is_alphanumeric()) {
        let chars: Vec<char> = part.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0 && c.is_uppercase() && {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower)
            };
            if boundary && !current.is_empty() {
                tokens.push(core::mem::take(&mut current));
            }
            current.extend(c.to_lowercase());
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn counts(name: &str) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for t in name_tokens(name) {
        *map.entry(t).or_insert(0.0) += 1.0;
    }
    map
}

/// Cosine similarity of the token-count vectors of two identifiers, in `[0, 1]`.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    let (ca, cb) = (counts(a), counts(b));
    if ca.is_empty() && cb.is_empty() {
        return if a == b { 1.0 } else { 0.0 };
    }
    let dot: f64 = ca
        .iter()
        .filter_map(|(t, x)| cb.get(t).map(|y| x * y))
        .sum();
    if dot == 0.0 {
        return 0.0;
    }
    let norm = |m: &BTreeMap<String, f64>| m.values().map(|v| v * v).sum::<f64>();
    let sim = dot / libm::sqrt(norm(&ca) * norm(&cb));
    sim.min(1.0)
}
