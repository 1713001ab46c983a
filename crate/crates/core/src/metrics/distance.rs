//! Character (or token) string distances.

use alloc::vec;

/// Length of the longest common subsequence of `a` and `b`.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance with unit-cost insert, delete and substitute.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: alloc::vec::Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let cost = usize::from(x != y);
            cur[j + 1] = (cur[j] + 1).min(prev[j + 1] + 1).min(prev[j] + cost);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS length over `orig`'s length, as a percentage. Zero when `orig` is empty.
pub fn lcs_ratio_percent<T: PartialEq>(pred: &[T], orig: &[T]) -> f64 {
    if orig.is_empty() {
        return 0.0;
    }
    lcs_len(pred, orig) as f64 * 100.0 / orig.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn kitten_sitting() {
        assert_eq!(levenshtein(&chars("kitten"), &chars("sitting")), 3);
    }

    #[test]
    fn insert_only() {
        assert_eq!(levenshtein(&chars(""), &chars("ab")), 2);
        assert_eq!(levenshtein(&chars("ab"), &chars("")), 2);
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_len(&chars("ac"), &chars("abc")), 2);
        assert!((lcs_ratio_percent(&chars("ac"), &chars("abc")) - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(lcs_ratio_percent(&chars(""), &chars("x")), 0.0);
        assert_eq!(lcs_ratio_percent(&chars("same"), &chars("same")), 100.0);
    }
}
