//! Sentence splitting, triple extraction and object-span alignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Gateway, GatewayError, TaskKind};
use crate::model::{CharSpan, FactSet, Triple};
use crate::normalize::normalize_text;
use crate::text::{find_ci, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("input text is empty")]
    EmptyInput,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no line of the extractor output parsed as a triple ({lines} non-empty lines)")]
    UnparseableOutput { lines: usize },
    #[error("object `{object}` has no token in the sentence")]
    NoAlignment { object: String },
    #[error("extended triples with predicate_id `{predicate_id}` disagree on subject or predicate")]
    InconsistentGroup { predicate_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub span: CharSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub text: String,
    pub sentences: Vec<Sentence>,
}

impl Passage {
    /// Rebuild the passage from sentence texts and the whitespace between them.
    pub fn reconstruct(&self) -> String {
        let chars: Vec<char> = self.text.chars().collect();
        let mut out = String::new();
        let mut pos = 0;
        for s in &self.sentences {
            out.extend(&chars[pos..s.span.start]);
            out.push_str(&s.text);
            pos = s.span.end;
        }
        out.extend(&chars[pos..]);
        out
    }
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "e.g", "i.e", "inc", "ltd",
    "co", "corp", "no", "fig", "approx", "gen", "gov", "sen", "rep", "col", "lt", "sgt", "capt",
];

const TERMINATORS: &[char] = &['.', '?', '!'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}', '\u{bb}'];

fn is_abbreviation(chars: &[char], dot_at: usize) -> bool {
    let start = chars[..dot_at]
        .iter()
        .rposition(|c| c.is_whitespace() || *c == '(' || *c == '"')
        .map_or(0, |i| i + 1);
    let word: String = chars[start..dot_at].iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Rule-based splitting on `.`, `?`, `!` (runs of them, plus closing quotes
/// or brackets) followed by whitespace or end of text, and on blank lines.
/// A single `.` after a known abbreviation is not a boundary.
pub fn split_sentences(p: &str) -> Result<Passage, ExtractionError> {
    if p.trim().is_empty() {
        return Err(ExtractionError::EmptyInput);
    }
    let chars: Vec<char> = p.chars().collect();
    let n = chars.len();
    let mut boundaries = Vec::new();
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if TERMINATORS.contains(&c) {
            let mut j = i;
            while j < n && TERMINATORS.contains(&chars[j]) {
                j += 1;
            }
            let single_dot = j == i + 1 && c == '.';
            while j < n && CLOSERS.contains(&chars[j]) {
                j += 1;
            }
            let at_break = j == n || chars[j].is_whitespace();
            if at_break && !(single_dot && is_abbreviation(&chars, i)) {
                boundaries.push(j);
            }
            i = j;
        } else if c == '\n' {
            let mut j = i + 1;
            while j < n && chars[j].is_whitespace() && chars[j] != '\n' {
                j += 1;
            }
            if j < n && chars[j] == '\n' {
                boundaries.push(i);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    boundaries.push(n);

    let mut sentences = Vec::new();
    let mut start = 0;
    for end in boundaries {
        let s = (start..end).find(|&k| !chars[k].is_whitespace());
        if let Some(s) = s {
            let e = (s..end).rev().find(|&k| !chars[k].is_whitespace()).unwrap() + 1;
            sentences.push(Sentence {
                text: chars[s..e].iter().collect(),
                span: CharSpan { start: s, end: e },
            });
        }
        start = end.max(start);
    }
    Ok(Passage {
        text: p.to_string(),
        sentences,
    })
}

/// Triples parsed from one extractor response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub facts: FactSet,
    pub dropped_malformed: usize,
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    for marker in ["- ", "* ", "\u{2022} "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return rest.trim_start();
        }
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return rest.trim_start();
        }
    }
    line
}

/// One triple per line: `(S; P; O)` or `(S; P; Pid; attr; O)`, optionally
/// behind a list marker. Lines that do not fit are dropped and counted.
pub fn parse_extraction(sentence_index: usize, output: &str) -> Result<Extraction, ExtractionError> {
    let mut facts = FactSet::new(sentence_index);
    let mut dropped = 0;
    let mut lines = 0;
    for raw in output.lines() {
        if raw.trim().is_empty() {
            continue;
        }
        lines += 1;
        let line = strip_list_marker(raw);
        let parsed = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .and_then(|inner| Triple::parse(inner).ok());
        match parsed {
            Some(t) => {
                facts.insert(t);
            }
            None => dropped += 1,
        }
    }
    if facts.is_empty() {
        return Err(ExtractionError::UnparseableOutput { lines });
    }
    Ok(Extraction {
        facts,
        dropped_malformed: dropped,
    })
}

pub fn extract_facts(
    sentence_index: usize,
    sentence: &str,
    gw: &Gateway,
) -> Result<Extraction, ExtractionError> {
    if sentence.trim().is_empty() {
        return Err(ExtractionError::EmptyInput);
    }
    let output = gw.complete(TaskKind::FactExtraction, sentence)?;
    parse_extraction(sentence_index, &output)
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "and", "or", "is", "was", "for", "by",
];

/// The object's span in the sentence: its leftmost case-insensitive
/// occurrence, else the longest run of tokens shared with the sentence
/// (ties go to the leftmost run in the sentence). Runs made only of
/// stopwords do not count.
pub fn align_span(sentence: &str, t: &Triple) -> Result<CharSpan, ExtractionError> {
    let object = t.object.trim();
    if let Some((s, e)) = find_ci(sentence, object) {
        return Ok(CharSpan { start: s, end: e });
    }
    let sent = tokenize(sentence);
    let obj = tokenize(object);
    let mut best: Option<(usize, usize)> = None; // (len, sentence index)
    for i in 0..sent.len() {
        for j in 0..obj.len() {
            let mut len = 0;
            while i + len < sent.len() && j + len < obj.len() && sent[i + len].text == obj[j + len].text {
                len += 1;
            }
            if len == 0 {
                continue;
            }
            let content = sent[i..i + len]
                .iter()
                .any(|tok| !STOPWORDS.contains(&tok.text.as_str()));
            if content && best.is_none_or(|(l, _)| len > l) {
                best = Some((len, i));
            }
        }
    }
    match best {
        Some((len, i)) => Ok(CharSpan {
            start: sent[i].start,
            end: sent[i + len - 1].end,
        }),
        None => Err(ExtractionError::NoAlignment {
            object: t.object.clone(),
        }),
    }
}

/// Extended triples sharing one predicate identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleGroup {
    pub predicate_id: String,
    pub members: Vec<Triple>,
}

impl TripleGroup {
    /// The other members of the group: the context for question generation.
    pub fn context_for(&self, t: &Triple) -> Vec<Triple> {
        self.members.iter().filter(|m| *m != t).cloned().collect()
    }
}

/// Groups in order of first appearance, plus the identifiers of groups whose
/// members disagree on subject or predicate.
pub fn partition_extended(ts: &[Triple]) -> (Vec<TripleGroup>, Vec<String>) {
    let mut groups: Vec<TripleGroup> = Vec::new();
    for t in ts.iter().filter(|t| t.is_extended()) {
        let id = t.predicate_id.as_deref().unwrap_or_default();
        let key = normalize_text(id);
        match groups.iter_mut().find(|g| normalize_text(&g.predicate_id) == key) {
            Some(g) => g.members.push(t.clone()),
            None => groups.push(TripleGroup {
                predicate_id: id.to_string(),
                members: vec![t.clone()],
            }),
        }
    }
    let (good, bad): (Vec<_>, Vec<_>) = groups.into_iter().partition(|g| {
        let head = &g.members[0];
        g.members.iter().all(|m| {
            normalize_text(&m.subject) == normalize_text(&head.subject)
                && normalize_text(&m.predicate) == normalize_text(&head.predicate)
        })
    });
    (good, bad.into_iter().map(|g| g.predicate_id).collect())
}

pub fn group_extended(ts: &[Triple]) -> Result<Vec<TripleGroup>, ExtractionError> {
    let (groups, bad) = partition_extended(ts);
    match bad.into_iter().next() {
        Some(predicate_id) => Err(ExtractionError::InconsistentGroup { predicate_id }),
        None => Ok(groups),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockBackend, PromptBank};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn texts(p: &Passage) -> Vec<&str> {
        p.sentences.iter().map(|s| s.text.as_str()).collect()
    }

    #[test]
    fn one_sentence_per_terminator() {
        let p = split_sentences("A. B? C!").unwrap();
        assert_eq!(texts(&p), ["A.", "B?", "C!"]);
    }

    #[test]
    fn abbreviation_is_not_a_boundary() {
        let p = split_sentences("Dr. Smith left. He returned.").unwrap();
        assert_eq!(texts(&p), ["Dr. Smith left.", "He returned."]);
        let p = split_sentences("He met Mrs. Jones, e.g. at work. Then left.").unwrap();
        assert_eq!(p.sentences.len(), 2);
    }

    #[test]
    fn no_terminator_single_sentence() {
        let p = split_sentences("  United States is in North America and has 51 states ").unwrap();
        assert_eq!(texts(&p), ["United States is in North America and has 51 states"]);
        assert_eq!(p.sentences[0].span, CharSpan { start: 2, end: 53 });
    }

    #[test]
    fn decimals_and_quotes() {
        let p = split_sentences("Pi is 3.14. He said \"stop.\" Then left").unwrap();
        assert_eq!(texts(&p), ["Pi is 3.14.", "He said \"stop.\"", "Then left"]);
    }

    #[test]
    fn blank_line_breaks() {
        let p = split_sentences("Heading\n\nBody text here.").unwrap();
        assert_eq!(texts(&p), ["Heading", "Body text here."]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(split_sentences(" \n\t"), Err(ExtractionError::EmptyInput));
    }

    proptest! {
        #[test]
        fn split_reconstructs_input(p in "[A-Za-z .?!\n\t,\"]{0,60}[A-Za-z]") {
            let passage = split_sentences(&p).unwrap();
            prop_assert_eq!(passage.reconstruct(), p.clone());
            let chars: Vec<char> = p.chars().collect();
            let mut covered = vec![false; chars.len()];
            let mut prev = 0;
            for s in &passage.sentences {
                prop_assert!(s.span.start >= prev);
                prev = s.span.end;
                for k in s.span.start..s.span.end { covered[k] = true; }
            }
            for (k, c) in chars.iter().enumerate() {
                prop_assert!(covered[k] || c.is_whitespace());
            }
        }

        #[test]
        fn grammar_never_panics(out in "(\\(|\\)|;|[a-z ]|\n|-|[0-9]){0,80}") {
            if let Ok(ex) = parse_extraction(0, &out) {
                prop_assert!(!ex.facts.is_empty());
                for t in ex.facts.iter() {
                    prop_assert!(t.validate().is_ok());
                }
            }
        }
    }

    #[test]
    fn malformed_lines_dropped_and_counted() {
        let out = "(A; p; B)\n(A; p)\nA; p; B\n(A; p; id; B)\n\n(a; P; b)\n1. (C; q; D)\n(A; p; ; B)";
        let ex = parse_extraction(3, out).unwrap();
        assert_eq!(ex.facts.flat.len(), 2);
        assert_eq!(ex.dropped_malformed, 4);
        assert_eq!(ex.facts.sentence_index, 3);
        assert_eq!(
            parse_extraction(0, "nothing here\n(x)"),
            Err(ExtractionError::UnparseableOutput { lines: 2 })
        );
    }

    fn gateway(entries: &[(&str, &str)]) -> Gateway {
        let bank = PromptBank::default();
        let mut mock = MockBackend::new();
        for (payload, response) in entries {
            mock.insert(&bank, TaskKind::FactExtraction, payload, response);
        }
        Gateway::new(Arc::new(mock), bank)
    }

    #[test]
    fn extracts_flat_triple() {
        let s = "Taylor Swift is 30 years old.";
        let gw = gateway(&[(s, "(Taylor Swift; age; 30 years old)")]);
        let ex = extract_facts(0, s, &gw).unwrap();
        assert_eq!(ex.facts.flat, vec![Triple::flat("Taylor Swift", "age", "30 years old").unwrap()]);
        assert!(ex.facts.extended.is_empty());
    }

    #[test]
    fn extracts_extended_triples() {
        let s = "Taylor Swift moved to Nashville at the age of 14.";
        let gw = gateway(&[(
            s,
            "(Taylor Swift; moved; move_ID; place; Nashville)\n(Taylor Swift; moved; move_ID; age; 14)",
        )]);
        let ex = extract_facts(0, s, &gw).unwrap();
        assert!(ex.facts.flat.is_empty());
        assert_eq!(
            ex.facts.extended,
            vec![
                Triple::extended("Taylor Swift", "moved", "move_ID", "place", "Nashville").unwrap(),
                Triple::extended("Taylor Swift", "moved", "move_ID", "age", "14").unwrap(),
            ]
        );
    }

    #[test]
    fn extracts_sub_claims() {
        let s = "United States is in North America and has 51 states";
        let gw = gateway(&[(
            s,
            "(United States; continent; North America)\n(United States; number of states; 51)",
        )]);
        let ex = extract_facts(0, s, &gw).unwrap();
        let objects: Vec<_> = ex.facts.flat.iter().map(|t| t.object.as_str()).collect();
        assert_eq!(objects, ["North America", "51"]);
    }

    #[test]
    fn gateway_errors_propagate() {
        let gw = gateway(&[]);
        assert!(matches!(
            extract_facts(0, "Something.", &gw),
            Err(ExtractionError::Gateway(GatewayError::FixtureMiss { .. }))
        ));
    }

    fn flat(o: &str) -> Triple {
        Triple::flat("s", "p", o).unwrap()
    }

    #[test]
    fn aligns_verbatim() {
        let s = "United States is in North America and has 51 states";
        let span = align_span(s, &flat("51")).unwrap();
        assert_eq!(span.slice(s), "51");
        let s = "Taylor Swift is 30 years old.";
        let span = align_span(s, &flat("30 years old")).unwrap();
        assert_eq!(span.slice(s), "30 years old");
        assert_eq!(align_span(s, &flat("TAYLOR")).unwrap(), CharSpan { start: 0, end: 6 });
    }

    #[test]
    fn aligns_by_token_run() {
        let s = "Taylor Swift moved to Nashville at the age of 14.";
        let span = align_span(s, &flat("Nashville, Tennessee")).unwrap();
        assert_eq!(span.slice(s), "Nashville");
    }

    #[test]
    fn no_alignment() {
        let s = "Taylor Swift moved to Nashville.";
        assert!(matches!(
            align_span(s, &flat("the moon")),
            Err(ExtractionError::NoAlignment { .. })
        ));
    }

    /// Brute force: every (sentence window, object window) pair of equal tokens.
    fn oracle_run(sentence: &str, object: &str) -> Option<(usize, usize)> {
        let s = tokenize(sentence);
        let o = tokenize(object);
        let mut best: Option<(usize, usize, usize)> = None; // len, start token, end token
        for a in 0..s.len() {
            for b in a + 1..=s.len() {
                let window: Vec<&str> = s[a..b].iter().map(|t| t.text.as_str()).collect();
                let in_object = (0..o.len()).any(|c| {
                    c + window.len() <= o.len()
                        && o[c..c + window.len()].iter().map(|t| t.text.as_str()).eq(window.iter().copied())
                });
                let content = window.iter().any(|w| !STOPWORDS.contains(w));
                let len = b - a;
                if in_object && content && best.is_none_or(|(l, sa, _)| len > l || (len == l && a < sa)) {
                    best = Some((len, a, b));
                }
            }
        }
        best.map(|(_, a, b)| (s[a].start, s[b - 1].end))
    }

    proptest! {
        #[test]
        fn token_run_matches_oracle(
            sent in proptest::collection::vec("(red|blue|green|the|of|sky|sea|[0-9])", 1..10),
            obj in proptest::collection::vec("(red|blue|green|the|of|sky|sea|[0-9]|moon)", 1..5),
        ) {
            let sentence = sent.join(" ");
            // comma-joined so the object never occurs verbatim
            let object = obj.join(", ") + " x";
            let got = align_span(&sentence, &flat(&object)).ok().map(|s| (s.start, s.end));
            prop_assert_eq!(got, oracle_run(&sentence, &object));
        }
    }

    #[test]
    fn groups_by_predicate_id() {
        let a = Triple::extended("Taylor Swift", "moved", "move_ID", "place", "Nashville").unwrap();
        let b = Triple::extended("Taylor Swift", "moved", "move_ID", "age", "14").unwrap();
        let c = Triple::extended("Taylor Swift", "born", "born_ID", "year", "1989").unwrap();
        let groups = group_extended(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members.len(), 2);
        assert_eq!(groups[0].context_for(&a), vec![b.clone()]);

        let groups = group_extended(std::slice::from_ref(&c)).unwrap();
        assert!(groups[0].context_for(&c).is_empty());

        let groups = group_extended(&[a.clone(), c, b]).unwrap();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn inconsistent_group() {
        let a = Triple::extended("Taylor Swift", "moved", "move_ID", "place", "Nashville").unwrap();
        let b = Triple::extended("Selena Gomez", "moved", "move_ID", "age", "14").unwrap();
        assert_eq!(
            group_extended(&[a, b]),
            Err(ExtractionError::InconsistentGroup {
                predicate_id: "move_ID".into()
            })
        );
    }
}
