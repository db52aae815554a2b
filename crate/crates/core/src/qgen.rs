//! One retrieval question per triple: type-aware for flat triples,
//! context-driven for extended ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Gateway, GatewayError, TaskKind};
use crate::model::Triple;
use crate::text::mentions_value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QGenError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("malformed question-generation output: {reason}")]
    MalformedQGenOutput { reason: &'static str },
    #[error("question `{question}` contains its own answer `{object}`")]
    AnswerLeak { object: String, question: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionMode {
    TypeAware,
    ContextDriven,
}

impl QuestionMode {
    pub fn for_triple(t: &Triple) -> Self {
        if t.is_extended() {
            QuestionMode::ContextDriven
        } else {
            QuestionMode::TypeAware
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub triple: Triple,
    pub object_type: Option<String>,
    pub question: String,
    pub mode: QuestionMode,
}

/// Payload for type-aware generation: the triple in surface form.
pub fn tqgen_payload(t: &Triple) -> String {
    t.to_string()
}

/// Payload for context-driven generation: the focus triple, then one
/// `Context:` line per sibling.
pub fn cqgen_payload(t: &Triple, context: &[Triple]) -> String {
    let mut out = format!("Triple: {t}");
    for c in context {
        out.push_str(&format!("\nContext: {c}"));
    }
    out
}

/// An extended triple with no siblings, flattened to
/// `(subject; predicate attr; object)`.
fn flattened(t: &Triple) -> Triple {
    let predicate = match &t.predicate_attr {
        Some(attr) => format!("{} {}", t.predicate, attr),
        None => t.predicate.clone(),
    };
    Triple {
        predicate,
        predicate_id: None,
        predicate_attr: None,
        ..t.clone()
    }
}

/// Reads the `TYPE:` and `QUESTION:` lines (prefixes are case-insensitive).
pub fn parse_qgen_output(
    output: &str,
    require_type: bool,
) -> Result<(Option<String>, String), QGenError> {
    let mut object_type = None;
    let mut question = None;
    for line in output.lines().map(str::trim) {
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("TYPE:") && object_type.is_none() {
            object_type = Some(line[5..].trim().to_string()).filter(|t| !t.is_empty());
        } else if upper.starts_with("QUESTION:") && question.is_none() {
            question = Some(line[9..].trim().to_string());
        }
    }
    let question = question.ok_or(QGenError::MalformedQGenOutput {
        reason: "missing QUESTION line",
    })?;
    if require_type && object_type.is_none() {
        return Err(QGenError::MalformedQGenOutput {
            reason: "missing TYPE line",
        });
    }
    if !question.ends_with('?') || question.len() < 2 {
        return Err(QGenError::MalformedQGenOutput {
            reason: "question does not end with '?'",
        });
    }
    Ok((object_type, question))
}

pub fn leaks_answer(object: &str, question: &str) -> bool {
    mentions_value(question, object)
}

/// `context` must be the other members of the triple's group when it is
/// extended, and empty when it is flat.
pub fn generate_question(
    t: &Triple,
    context: &[Triple],
    gw: &Gateway,
) -> Result<GeneratedQuestion, QGenError> {
    let mode = QuestionMode::for_triple(t);
    let (output, require_type) = if t.is_extended() && !context.is_empty() {
        let out = gw.complete(TaskKind::ContextQGen, &cqgen_payload(t, context))?;
        (out, gw.bank().cqgen_type_scaffold())
    } else if t.is_extended() {
        let out = gw.complete(TaskKind::TypeAwareQGen, &tqgen_payload(&flattened(t)))?;
        (out, true)
    } else {
        (gw.complete(TaskKind::TypeAwareQGen, &tqgen_payload(t))?, true)
    };
    let (object_type, question) = parse_qgen_output(&output, require_type)?;
    if leaks_answer(&t.object, &question) {
        return Err(QGenError::AnswerLeak {
            object: t.object.clone(),
            question,
        });
    }
    Ok(GeneratedQuestion {
        triple: t.clone(),
        object_type,
        question,
        mode,
    })
}
