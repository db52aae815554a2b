//! Shared domain types and their canonical JSON form.
//!
//! Every type here is an immutable value once constructed. Field names in the
//! serialized form are the snake_case names below; that JSON is both the
//! service wire format and the report file format.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::config::ConfigOverrides;
use crate::revision::RevisionProposal;
use crate::text::{char_len, char_slice};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("triple field `{field}` is empty")]
    EmptyField { field: &'static str },
    #[error("triple field `{field}` contains a reserved character (';' or line break)")]
    ReservedChar { field: &'static str },
    #[error("predicate_id and predicate_attr must be both present or both absent")]
    HalfExtended,
    #[error("canonical triple must have 3 or 5 fields, found {0}")]
    FieldCount(usize),
    #[error("invalid span {start}..{end}")]
    InvalidSpan { start: usize, end: usize },
}

/// A flat `(S; P; O)` or extended `(S; P; Pid; attr; O)` fact unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTriple")]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub predicate_id: Option<String>,
    pub predicate_attr: Option<String>,
    pub object: String,
}

#[derive(Deserialize)]
struct RawTriple {
    subject: String,
    predicate: String,
    #[serde(default)]
    predicate_id: Option<String>,
    #[serde(default)]
    predicate_attr: Option<String>,
    object: String,
}

impl TryFrom<RawTriple> for Triple {
    type Error = ModelError;

    fn try_from(raw: RawTriple) -> Result<Self, Self::Error> {
        let t = Triple {
            subject: raw.subject,
            predicate: raw.predicate,
            predicate_id: raw.predicate_id,
            predicate_attr: raw.predicate_attr,
            object: raw.object,
        };
        t.validate()?;
        Ok(t)
    }
}

fn check_field(field: &'static str, value: &str) -> Result<(), ModelError> {
    if value.trim().is_empty() {
        return Err(ModelError::EmptyField { field });
    }
    if value.contains([';', '\n', '\r']) {
        return Err(ModelError::ReservedChar { field });
    }
    Ok(())
}

impl Triple {
    pub fn flat(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let t = Triple {
            subject: subject.into().trim().to_string(),
            predicate: predicate.into().trim().to_string(),
            predicate_id: None,
            predicate_attr: None,
            object: object.into().trim().to_string(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn extended(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        predicate_id: impl Into<String>,
        predicate_attr: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let t = Triple {
            subject: subject.into().trim().to_string(),
            predicate: predicate.into().trim().to_string(),
            predicate_id: Some(predicate_id.into().trim().to_string()),
            predicate_attr: Some(predicate_attr.into().trim().to_string()),
            object: object.into().trim().to_string(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_field("subject", &self.subject)?;
        check_field("predicate", &self.predicate)?;
        match (&self.predicate_id, &self.predicate_attr) {
            (Some(id), Some(attr)) => {
                check_field("predicate_id", id)?;
                check_field("predicate_attr", attr)?;
            }
            (None, None) => {}
            _ => return Err(ModelError::HalfExtended),
        }
        check_field("object", &self.object)
    }

    pub fn is_extended(&self) -> bool {
        self.predicate_id.is_some()
    }

    /// Same triple with a different object; shape is preserved.
    pub fn with_object(&self, object: impl Into<String>) -> Result<Self, ModelError> {
        let t = Triple {
            object: object.into().trim().to_string(),
            ..self.clone()
        };
        t.validate()?;
        Ok(t)
    }

    fn fields(&self) -> Vec<&str> {
        let mut out = vec![self.subject.as_str(), self.predicate.as_str()];
        if let (Some(id), Some(attr)) = (&self.predicate_id, &self.predicate_attr) {
            out.push(id);
            out.push(attr);
        }
        out.push(&self.object);
        out
    }

    /// Parse the `"(S; P; O)"` / `"(S; P; Pid; attr; O)"` surface form.
    /// Surrounding parentheses are optional.
    pub fn parse(line: &str) -> Result<Self, ModelError> {
        let trimmed = line.trim();
        let inner = match trimmed.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            Some(inner) => inner,
            None => trimmed,
        };
        let parts: Vec<&str> = inner.split(';').map(str::trim).collect();
        match parts.as_slice() {
            [s, p, o] => Triple::flat(*s, *p, *o),
            [s, p, id, attr, o] => Triple::extended(*s, *p, *id, *attr, *o),
            other => Err(ModelError::FieldCount(other.len())),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.fields().join("; "))
    }
}

/// Lowercase, single-space, `"; "`-joined rendering. Equal for triples that
/// differ only in case or whitespace.
pub fn canonicalize(t: &Triple) -> Result<String, ModelError> {
    t.validate()?;
    Ok(t.fields()
        .iter()
        .map(|f| f.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; "))
}

/// Inverse of [`canonicalize`] up to case and whitespace.
pub fn parse_canonical(s: &str) -> Result<Triple, ModelError> {
    // No surrounding parentheses to strip: a field may itself start with '('.
    let parts: Vec<&str> = s.split(';').map(str::trim).collect();
    match parts.as_slice() {
        [s, p, o] => Triple::flat(*s, *p, *o),
        [s, p, id, attr, o] => Triple::extended(*s, *p, *id, *attr, *o),
        other => Err(ModelError::FieldCount(other.len())),
    }
}

pub fn same_fact(a: &Triple, b: &Triple) -> bool {
    matches!((canonicalize(a), canonicalize(b)), (Ok(x), Ok(y)) if x == y)
}

/// Flat and extended triples extracted from one sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSet {
    pub sentence_index: usize,
    pub flat: Vec<Triple>,
    pub extended: Vec<Triple>,
}

impl FactSet {
    pub fn new(sentence_index: usize) -> Self {
        FactSet {
            sentence_index,
            ..Default::default()
        }
    }

    /// Adds a triple to the matching side; returns false if an equal
    /// canonical form is already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        let key = canonicalize(&t).ok();
        if self.iter().any(|x| canonicalize(x).ok() == key) {
            return false;
        }
        if t.is_extended() {
            self.extended.push(t);
        } else {
            self.flat.push(t);
        }
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.flat.iter().chain(self.extended.iter())
    }

    pub fn len(&self) -> usize {
        self.flat.len() + self.extended.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered `Questionable < LikelySupported < StronglySupported`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerdictLabel {
    Questionable,
    LikelySupported,
    StronglySupported,
}

impl VerdictLabel {
    pub const ALL: [VerdictLabel; 3] = [
        VerdictLabel::StronglySupported,
        VerdictLabel::LikelySupported,
        VerdictLabel::Questionable,
    ];
}

impl fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictLabel::StronglySupported => "Strongly Supported",
            VerdictLabel::LikelySupported => "Likely Supported",
            VerdictLabel::Questionable => "Questionable",
        })
    }
}

/// Half-open character range `[start, end)` over a sentence or passage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpan")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Deserialize)]
struct RawSpan {
    start: usize,
    end: usize,
}

impl TryFrom<RawSpan> for CharSpan {
    type Error = ModelError;
    fn try_from(raw: RawSpan) -> Result<Self, Self::Error> {
        CharSpan::new(raw.start, raw.end)
    }
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Result<Self, ModelError> {
        if start >= end {
            return Err(ModelError::InvalidSpan { start, end });
        }
        Ok(CharSpan { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn shift(&self, by: usize) -> CharSpan {
        CharSpan {
            start: self.start + by,
            end: self.end + by,
        }
    }

    pub fn overlap(&self, other: &CharSpan) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    pub fn overlaps(&self, other: &CharSpan) -> bool {
        self.overlap(other) > 0
    }

    pub fn jaccard(&self, other: &CharSpan) -> f64 {
        let inter = self.overlap(other);
        let union = self.len() + other.len() - inter;
        inter as f64 / union as f64
    }

    pub fn slice<'a>(&self, s: &'a str) -> &'a str {
        char_slice(s, self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Kg,
    Web,
}

/// A ranked web passage with its highlighted short answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebHit {
    pub passage: String,
    pub short_answer: String,
    pub source_link: String,
}

impl WebHit {
    /// Non-empty short answer that occurs (case-insensitively) in the passage,
    /// and a non-empty link.
    pub fn is_valid(&self) -> bool {
        !self.short_answer.trim().is_empty()
            && !self.source_link.trim().is_empty()
            && self
                .passage
                .to_lowercase()
                .contains(&self.short_answer.to_lowercase())
    }
}

/// The claim triple with its object replaced by a retrieved answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceTriple {
    #[serde(flatten)]
    pub triple: Triple,
    pub origin: Origin,
    pub web_hit: Option<WebHit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Supporting,
    NotSupporting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    Deterministic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedEvidence {
    pub evidence: EvidenceTriple,
    pub classification: Classification,
    pub judge: JudgeKind,
}

impl ClassifiedEvidence {
    pub fn is_supporting(&self) -> bool {
        self.classification == Classification::Supporting
    }
}

/// Audit flags attached to a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictNote {
    /// No evidence was retrieved from either source.
    Unattributed,
    /// A singleton KG answer did not support the claim.
    KgContradicted,
    /// Some judge calls failed; their evidence is not attached.
    JudgeFailures { count: usize },
    /// Evidence retrieval from one source failed.
    RetrievalFailed { origin: Origin, message: String },
    /// No retrieval question could be generated for the triple.
    QuestionGenerationFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub triple: Triple,
    pub label: VerdictLabel,
    pub span: CharSpan,
    pub evidence: Vec<ClassifiedEvidence>,
    pub question: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<VerdictNote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("sentence {sentence}: verdict {verdict} violates the {label} evidence rule: {reason}")]
    LabelEvidence {
        sentence: usize,
        verdict: usize,
        label: VerdictLabel,
        reason: &'static str,
    },
    #[error("sentence {sentence}: verdict span {start}..{end} exceeds sentence length {len}")]
    SpanOutOfRange {
        sentence: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("sentence {sentence}: verdict spans overlap")]
    OverlappingSpans { sentence: usize },
    #[error("sentence {0} is out of order or does not match the passage")]
    SentenceMismatch(usize),
}

impl Verdict {
    pub fn is_unattributed(&self) -> bool {
        self.label == VerdictLabel::Questionable && self.evidence.is_empty()
    }

    /// Checks the label against the evidence it carries.
    pub fn check_label(&self) -> Result<(), &'static str> {
        let supporting = self.evidence.iter().filter(|e| e.is_supporting()).count();
        match self.label {
            VerdictLabel::StronglySupported => {
                let kg: Vec<_> = self
                    .evidence
                    .iter()
                    .filter(|e| e.evidence.origin == Origin::Kg)
                    .collect();
                if kg.len() != 1 || !kg[0].is_supporting() || supporting != 1 {
                    return Err("needs exactly one supporting item from a singleton KG answer");
                }
            }
            VerdictLabel::LikelySupported if supporting == 0 => {
                return Err("needs at least one supporting item");
            }
            VerdictLabel::Questionable if supporting > 0 => {
                return Err("must not carry supporting evidence");
            }
            _ => {}
        }
        Ok(())
    }
}

/// One sentence of a report: its position in the passage and its verdicts,
/// ordered by span start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceReport {
    pub index: usize,
    pub text: String,
    pub span: CharSpan,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub revisions: Vec<RevisionProposal>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionDiagnostics {
    pub dropped_malformed: usize,
    pub dropped_hallucinated: usize,
    pub inconsistent_groups: usize,
    #[serde(default)]
    pub dropped_overlapping: usize,
    #[serde(default)]
    pub unparseable_sentences: usize,
}

impl ExtractionDiagnostics {
    pub fn absorb(&mut self, other: &ExtractionDiagnostics) {
        self.dropped_malformed += other.dropped_malformed;
        self.dropped_hallucinated += other.dropped_hallucinated;
        self.inconsistent_groups += other.inconsistent_groups;
        self.dropped_overlapping += other.dropped_overlapping;
        self.unparseable_sentences += other.unparseable_sentences;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine_version: String,
    pub config_digest: String,
    #[serde(default)]
    pub overrides: Option<ConfigOverrides>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub passage: String,
    pub sentences: Vec<SentenceReport>,
    pub provenance: Provenance,
    pub extraction_diagnostics: ExtractionDiagnostics,
    /// False when the wall-clock budget ran out before every sentence finished.
    pub complete: bool,
}

impl VerificationReport {
    /// Every verdict with its span shifted to passage offsets.
    pub fn passage_verdicts(&self) -> impl Iterator<Item = (CharSpan, &Verdict)> {
        self.sentences.iter().flat_map(|s| {
            s.verdicts
                .iter()
                .map(move |v| (v.span.shift(s.span.start), v))
        })
    }

    pub fn verdict_count(&self) -> usize {
        self.sentences.iter().map(|s| s.verdicts.len()).sum()
    }

    pub fn has_questionable(&self) -> bool {
        self.passage_verdicts()
            .any(|(_, v)| v.label == VerdictLabel::Questionable)
    }

    /// Structural and label/evidence invariants.
    pub fn validate(&self) -> Result<(), ReportError> {
        let mut prev_end = 0;
        for (si, sentence) in self.sentences.iter().enumerate() {
            if sentence.span.start < prev_end
                || sentence.span.slice(&self.passage) != sentence.text
            {
                return Err(ReportError::SentenceMismatch(si));
            }
            prev_end = sentence.span.end;
            let len = char_len(&sentence.text);
            let mut spans: Vec<CharSpan> = Vec::new();
            for (vi, v) in sentence.verdicts.iter().enumerate() {
                if v.span.end > len {
                    return Err(ReportError::SpanOutOfRange {
                        sentence: si,
                        start: v.span.start,
                        end: v.span.end,
                        len,
                    });
                }
                if spans.iter().any(|s| s.overlaps(&v.span)) {
                    return Err(ReportError::OverlappingSpans { sentence: si });
                }
                spans.push(v.span);
                v.check_label().map_err(|reason| ReportError::LabelEvidence {
                    sentence: si,
                    verdict: vi,
                    label: v.label,
                    reason,
                })?;
            }
        }
        Ok(())
    }
}
