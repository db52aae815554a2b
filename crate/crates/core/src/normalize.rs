//! Value normalization used by the deterministic entailment judge, the
//! answer-leak check, revision checks and benchmark attribution.
//!
//! [`normalize_value`] is total: anything that is not an integer, a spelled-out
//! number in `0..=100` or a recognizable date comes back as normalized text.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A typed, comparison-ready form of a short answer or triple object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum NormalizedValue {
    Number(i64),
    Date(NaiveDate),
    Text(String),
}

impl NormalizedValue {
    pub fn is_typed(&self) -> bool {
        !matches!(self, NormalizedValue::Text(_))
    }

    /// Both sides are numbers, or both are dates.
    pub fn same_kind(&self, other: &NormalizedValue) -> bool {
        matches!(
            (self, other),
            (NormalizedValue::Number(_), NormalizedValue::Number(_))
                | (NormalizedValue::Date(_), NormalizedValue::Date(_))
        )
    }
}

impl fmt::Display for NormalizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizedValue::Number(n) => write!(f, "{n}"),
            NormalizedValue::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            NormalizedValue::Text(t) => f.write_str(t),
        }
    }
}

const SURROUNDING: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '\'', '`', '(', ')', '[', ']', '{', '}', '\u{201c}',
    '\u{201d}', '\u{2018}', '\u{2019}', '\u{ab}', '\u{bb}',
];

/// Trim, lowercase, collapse inner whitespace and strip surrounding punctuation.
pub fn normalize_text(v: &str) -> String {
    let lowered = v.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || SURROUNDING.contains(&c))
        .to_string()
}

pub fn normalize_value(v: &str) -> NormalizedValue {
    let text = normalize_text(v);
    if let Some(n) = parse_integer(&text) {
        return NormalizedValue::Number(n);
    }
    if let Some(n) = parse_spelled_number(&text) {
        return NormalizedValue::Number(n);
    }
    if let Some(d) = parse_date(&text) {
        return NormalizedValue::Date(d);
    }
    NormalizedValue::Text(text)
}

/// `true` when both strings normalize to the same value.
pub fn values_equal(a: &str, b: &str) -> bool {
    normalize_value(a) == normalize_value(b)
}

fn parse_integer(s: &str) -> Option<i64> {
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    if digits.is_empty() {
        return None;
    }
    let plain = if digits.contains(',') {
        let groups: Vec<&str> = digits.split(',').collect();
        let head_ok = (1..=3).contains(&groups[0].len());
        let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
        if !head_ok || !rest_ok {
            return None;
        }
        groups.concat()
    } else {
        digits.to_string()
    };
    if !plain.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    plain.parse::<i64>().ok().map(|n| sign * n)
}

const UNITS: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];

const TENS: [&str; 8] = [
    "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

/// Spelled-out numbers from zero to one hundred ("twenty-one", "twenty one").
pub fn parse_spelled_number(s: &str) -> Option<i64> {
    match s {
        "hundred" | "one hundred" | "a hundred" => return Some(100),
        _ => {}
    }
    if let Some(i) = UNITS.iter().position(|u| *u == s) {
        return Some(i as i64);
    }
    let parts: Vec<&str> = s.split(['-', ' ']).filter(|p| !p.is_empty()).collect();
    let first = parts.first()?;
    let tens = TENS.iter().position(|t| t == first)? as i64 * 10 + 20;
    match parts.len() {
        1 => Some(tens),
        2 => {
            let unit = UNITS[1..10].iter().position(|u| *u == parts[1])? as i64 + 1;
            Some(tens + unit)
        }
        _ => None,
    }
}

const DATE_FORMATS: &[&str] = &[
    "%Y-%m-%d",
    "%B %d, %Y",
    "%B %d %Y",
    "%d %B %Y",
    "%d %B, %Y",
    "%b %d, %Y",
    "%b %d %Y",
    "%d %b %Y",
    "%Y/%m/%d",
];

fn parse_date(s: &str) -> Option<NaiveDate> {
    if !s.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let cleaned = strip_ordinal_suffixes(&s.replace(". ", " "));
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(&cleaned, fmt).ok())
}

/// "13th" -> "13", leaving other words alone.
fn strip_ordinal_suffixes(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let (core, comma) = match w.strip_suffix(',') {
                Some(c) => (c, ","),
                None => (w, ""),
            };
            for suffix in ["st", "nd", "rd", "th"] {
                if let Some(num) = core.strip_suffix(suffix) {
                    if !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()) {
                        return format!("{num}{comma}");
                    }
                }
            }
            w.to_string()
        })
        .collect::<Vec<_>>()
        .join(" ")
}
