//! Brute-force oracles, independent of the automaton.
#![allow(dead_code)]

/// End offset (exclusive) of the first occurrence of `pattern` in `text`.
pub fn naive_first_end(pattern: &[u8], text: &[u8]) -> Option<usize> {
    if pattern.len() > text.len() {
        return None;
    }
    (0..=text.len() - pattern.len())
        .find(|&i| &text[i..i + pattern.len()] == pattern)
        .map(|i| i + pattern.len())
}

pub fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    needle.is_empty() || naive_first_end(needle, haystack).is_some()
}

/// Largest d such that pattern[..d] occurs somewhere in text.
pub fn longest_prefix_in(pattern: &[u8], text: &[u8]) -> usize {
    (0..=pattern.len())
        .rev()
        .find(|&d| contains(text, &pattern[..d]))
        .unwrap_or(0)
}

/// Depth of the longest proper suffix of pattern[..depth] that is a prefix of pattern.
pub fn longest_border(pattern: &[u8], depth: usize) -> usize {
    let label = &pattern[..depth];
    (0..depth)
        .rev()
        .find(|&k| label[depth - k..] == pattern[..k])
        .unwrap_or(0)
}

pub const ALPHABET: &[u8] = b"ab'= ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    Rejected(u64),
    Alarm(u64, u64, u64),
    Accepted(u64, u64),
}

/// Verdict computed purely from the oracles. Scores are kept as (numer, denom)
/// of 100*depth/len and compared by cross-multiplication.
pub fn oracle_verdict(
    patterns: &[(u64, Vec<u8>)],
    text: &[u8],
    threshold: (u64, u64),
) -> OracleVerdict {
    if let Some((id, _)) = patterns
        .iter()
        .filter(|(_, p)| contains(text, p))
        .min_by_key(|(id, _)| *id)
    {
        return OracleVerdict::Rejected(*id);
    }
    let mut best: Option<(u64, u64, u64)> = None;
    for (id, p) in patterns {
        let num = 100 * longest_prefix_in(p, text) as u64;
        let den = p.len() as u64;
        let better = match best {
            None => true,
            Some((bid, bn, bd)) => num * bd > bn * den || (num * bd == bn * den && *id < bid),
        };
        if better {
            best = Some((*id, num, den));
        }
    }
    match best {
        None => OracleVerdict::Accepted(0, 1),
        Some((id, n, d)) if n * threshold.1 >= threshold.0 * d => OracleVerdict::Alarm(id, n, d),
        Some((_, n, d)) => OracleVerdict::Accepted(n, d),
    }
}
