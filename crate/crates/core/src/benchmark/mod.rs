//! Evaluation data: perturbed gold instances and the span/label/attribution
//! scorer.

mod perturb;
mod score;

pub use self::perturb::{perturb, perturb_corpus, perturb_with_rng, pick_index, Link, LinkedSentence};
pub use self::score::{
    score, score_instance, EvalReport, InstanceMatches, LabelScores, MatchConfig, MatchMode, MatchRow,
};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CharSpan, Triple, VerdictLabel, VerificationReport};
use crate::text::char_len;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchmarkError {
    #[error("no link has a typed entity with a same-type replacement")]
    NoEligibleLink,
    #[error("invalid links: {0}")]
    InvalidLinks(String),
    #[error("system reports and gold instances do not pair up: {0}")]
    InstanceMismatch(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldFact {
    /// Offsets into the instance text.
    pub span: CharSpan,
    pub label: VerdictLabel,
    /// Values a system must cite (after normalization) for the fact to count
    /// as attributed.
    pub evidence_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    /// The replaced span, in the perturbed text.
    pub span: CharSpan,
    pub original_entity: String,
    pub replacement_entity: String,
    pub shared_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceProvenance {
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedInstance {
    pub id: String,
    pub text: String,
    pub gold_facts: Vec<GoldFact>,
    pub provenance: InstanceProvenance,
}

impl AnnotatedInstance {
    /// Spans inside the text and pairwise disjoint; a perturbation record
    /// matches a Questionable gold fact.
    pub fn validate(&self) -> Result<(), String> {
        let len = char_len(&self.text);
        for (i, f) in self.gold_facts.iter().enumerate() {
            if f.span.end > len {
                return Err(format!("gold fact {i} ends past the text"));
            }
            if self.gold_facts[..i].iter().any(|g| g.span.overlaps(&f.span)) {
                return Err(format!("gold fact {i} overlaps an earlier one"));
            }
        }
        if let Some(p) = &self.provenance.perturbation {
            if !self
                .gold_facts
                .iter()
                .any(|f| f.span == p.span && f.label == VerdictLabel::Questionable)
            {
                return Err("perturbed span is not a Questionable gold fact".into());
            }
        }
        Ok(())
    }

    /// Gold built from a report: every verdict with its label and cited
    /// values. Scoring a report against its own gold is perfect.
    pub fn from_report(id: impl Into<String>, report: &VerificationReport) -> Self {
        AnnotatedInstance {
            id: id.into(),
            text: report.passage.clone(),
            gold_facts: report
                .passage_verdicts()
                .map(|(span, v)| GoldFact {
                    span,
                    label: v.label,
                    evidence_keys: v
                        .evidence
                        .iter()
                        .map(|e| e.evidence.triple.object.clone())
                        .collect(),
                    triple: Some(v.triple.clone()),
                })
                .collect(),
            provenance: InstanceProvenance {
                source_id: report.id.clone().unwrap_or_default(),
                perturbation: None,
            },
        }
    }
}

/// One JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, BenchmarkError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| BenchmarkError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("value serializes"));
        out.push('\n');
    }
    out
}

/// Reports from a single JSON object, a JSON array, or JSON Lines.
pub fn read_reports(text: &str) -> Result<Vec<VerificationReport>, BenchmarkError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| BenchmarkError::Parse {
            line: 1,
            message: e.to_string(),
        });
    }
    if let Ok(one) = serde_json::from_str::<VerificationReport>(trimmed) {
        return Ok(vec![one]);
    }
    read_jsonl(text)
}
