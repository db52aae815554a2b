//! Character-offset helpers. Every offset in this crate counts Unicode scalar
//! values, never bytes.

use crate::normalize::{normalize_text, normalize_value};

/// An alphanumeric run with its character offsets in the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring by character offsets. Out-of-range bounds are clamped.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let byte_at = |n: usize| s.char_indices().nth(n).map(|(i, _)| i).unwrap_or(s.len());
    let from = byte_at(start);
    let to = byte_at(end.max(start));
    &s[from..to]
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(s: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (i, c) in s.chars().enumerate() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = i;
            }
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: i,
            });
        }
    }
    if !current.is_empty() {
        out.push(Token {
            text: current,
            start,
            end: char_len(s),
        });
    }
    out
}

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Leftmost case-insensitive occurrence of `needle`, as a character range.
pub fn find_ci(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    find_ci_from(haystack, needle, 0)
}

pub fn find_ci_from(haystack: &str, needle: &str, from: usize) -> Option<(usize, usize)> {
    let hay: Vec<char> = haystack.chars().collect();
    let pat: Vec<char> = needle.chars().collect();
    if pat.is_empty() || pat.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - pat.len())
        .find(|&i| pat.iter().zip(&hay[i..]).all(|(p, h)| chars_eq_ci(*p, *h)))
        .map(|i| (i, i + pat.len()))
}

/// Whether the token sequence of `needle` occurs contiguously in `haystack`.
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let hay: Vec<String> = tokenize(haystack).into_iter().map(|t| t.text).collect();
    let pat: Vec<String> = tokenize(needle).into_iter().map(|t| t.text).collect();
    if pat.is_empty() || pat.len() > hay.len() {
        return false;
    }
    hay.windows(pat.len()).any(|w| w == pat.as_slice())
}

const VALUE_WINDOW: usize = 4;

/// Whether `haystack` mentions the value of `needle`: either the needle's
/// normalized text as a token phrase, or (for numbers and dates) any short
/// token window that normalizes to the same typed value.
pub fn mentions_value(haystack: &str, needle: &str) -> bool {
    let needle_text = normalize_text(needle);
    if needle_text.is_empty() {
        return false;
    }
    if contains_phrase(haystack, &needle_text) {
        return true;
    }
    let target = normalize_value(needle);
    if !target.is_typed() {
        return false;
    }
    let tokens = tokenize(haystack);
    for i in 0..tokens.len() {
        for width in 1..=VALUE_WINDOW.min(tokens.len() - i) {
            let span = char_slice(haystack, tokens[i].start, tokens[i + width - 1].end);
            if normalize_value(span) == target {
                return true;
            }
        }
    }
    false
}
