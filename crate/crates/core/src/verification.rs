//! Evidence classification and the two-step verdict procedure.
//!
//! Step 1: a single KG answer that supports the claim makes it Strongly
//! Supported. Step 2: otherwise every KG and web answer is classified, and
//! one supporting item makes it Likely Supported; none makes it Questionable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Gateway, GatewayError, TaskKind};
use crate::model::{
    CharSpan, Classification, ClassifiedEvidence, EvidenceTriple, JudgeKind, ModelError, Origin,
    Triple, Verdict, VerdictLabel, VerdictNote, WebHit,
};
use crate::normalize::{normalize_text, normalize_value, NormalizedValue};
use crate::retrieval::KgAnswerSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerificationError {
    #[error("retrieved answer is empty")]
    EmptyAnswer,
    #[error("web evidence must carry its hit and KG evidence must not")]
    OriginMismatch,
    #[error("judge answered neither `supporting` nor `not supporting`: {output:?}")]
    MalformedJudgeOutput { output: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMode {
    /// Compare normalized values first; ask the LLM only when that is
    /// inconclusive.
    #[default]
    DeterministicFirst,
    LlmOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub judge_mode: JudgeMode,
    /// A contradicting singleton KG answer makes the claim Questionable
    /// outright, without consulting web evidence.
    pub strict_step1: bool,
}

/// The claim with its object replaced by `answer`.
pub fn build_evidence_triple(
    claim: &Triple,
    answer: &str,
    origin: Origin,
    hit: Option<WebHit>,
) -> Result<EvidenceTriple, VerificationError> {
    let answer = answer.trim();
    if answer.is_empty() {
        return Err(VerificationError::EmptyAnswer);
    }
    if (origin == Origin::Web) != hit.is_some() {
        return Err(VerificationError::OriginMismatch);
    }
    Ok(EvidenceTriple {
        triple: claim.with_object(answer)?,
        origin,
        web_hit: hit,
    })
}

/// Equal values support; two numbers or two dates that differ do not; any
/// other pair is inconclusive.
pub fn deterministic_judgement(claim_object: &str, evidence_object: &str) -> Option<Classification> {
    let a = normalize_value(claim_object);
    let b = normalize_value(evidence_object);
    if a == b {
        return Some(Classification::Supporting);
    }
    match (&a, &b) {
        (NormalizedValue::Number(_), NormalizedValue::Number(_))
        | (NormalizedValue::Date(_), NormalizedValue::Date(_)) => Some(Classification::NotSupporting),
        _ => None,
    }
}

pub fn entailment_payload(claim: &Triple, evidence: &Triple) -> String {
    format!("Claim: {claim}\nEvidence: {evidence}")
}

pub fn parse_judge_output(output: &str) -> Result<Classification, VerificationError> {
    let first = output.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    match normalize_text(first).as_str() {
        "supporting" => Ok(Classification::Supporting),
        "not supporting" | "not_supporting" => Ok(Classification::NotSupporting),
        _ => Err(VerificationError::MalformedJudgeOutput {
            output: output.to_string(),
        }),
    }
}

/// Classifies one evidence triple against its claim.
pub trait Judge: Sync {
    fn judge(
        &self,
        claim: &Triple,
        evidence: &EvidenceTriple,
    ) -> Result<(Classification, JudgeKind), VerificationError>;
}

impl<F> Judge for F
where
    F: Fn(&Triple, &EvidenceTriple) -> Result<(Classification, JudgeKind), VerificationError> + Sync,
{
    fn judge(
        &self,
        claim: &Triple,
        evidence: &EvidenceTriple,
    ) -> Result<(Classification, JudgeKind), VerificationError> {
        self(claim, evidence)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GatewayJudge<'a> {
    pub gateway: &'a Gateway,
    pub mode: JudgeMode,
}

impl Judge for GatewayJudge<'_> {
    fn judge(
        &self,
        claim: &Triple,
        evidence: &EvidenceTriple,
    ) -> Result<(Classification, JudgeKind), VerificationError> {
        if self.mode == JudgeMode::DeterministicFirst {
            if let Some(c) = deterministic_judgement(&claim.object, &evidence.triple.object) {
                return Ok((c, JudgeKind::Deterministic));
            }
        }
        let out = self
            .gateway
            .complete(TaskKind::TripleEntailment, &entailment_payload(claim, &evidence.triple))?;
        Ok((parse_judge_output(&out)?, JudgeKind::Llm))
    }
}

pub fn entail(
    claim: &Triple,
    evidence: EvidenceTriple,
    mode: JudgeMode,
    gw: &Gateway,
) -> Result<ClassifiedEvidence, VerificationError> {
    let (classification, judge) = GatewayJudge { gateway: gw, mode }.judge(claim, &evidence)?;
    Ok(ClassifiedEvidence {
        evidence,
        classification,
        judge,
    })
}

/// The outcome of the decision procedure for one triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub label: VerdictLabel,
    /// KG items first, then web items in rank order.
    pub evidence: Vec<ClassifiedEvidence>,
    pub notes: Vec<VerdictNote>,
}

impl Decision {
    pub fn into_verdict(self, triple: Triple, span: CharSpan, question: String) -> Verdict {
        Verdict {
            triple,
            label: self.label,
            span,
            evidence: self.evidence,
            question,
            notes: self.notes,
        }
    }
}

fn classify_all(
    claim: &Triple,
    items: Vec<(String, Origin, Option<WebHit>)>,
    judge: &dyn Judge,
) -> (Vec<ClassifiedEvidence>, usize) {
    let results: Vec<Result<ClassifiedEvidence, VerificationError>> = items
        .into_par_iter()
        .map(|(answer, origin, hit)| {
            let evidence = build_evidence_triple(claim, &answer, origin, hit)?;
            let (classification, kind) = judge.judge(claim, &evidence)?;
            Ok(ClassifiedEvidence {
                evidence,
                classification,
                judge: kind,
            })
        })
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = 0;
    for r in results {
        match r {
            Ok(c) => ok.push(c),
            Err(e) => {
                log::warn!("judge failed for {claim}: {e}");
                failures += 1;
            }
        }
    }
    (ok, failures)
}

pub fn decide(
    claim: &Triple,
    kg: &KgAnswerSet,
    web: &[WebHit],
    config: DecisionConfig,
    judge: &dyn Judge,
) -> Decision {
    let mut notes = Vec::new();
    let kg_items: Vec<_> = kg.answers.iter().map(|a| (a.clone(), Origin::Kg, None)).collect();
    let web_items: Vec<_> = web
        .iter()
        .map(|h| (h.short_answer.clone(), Origin::Web, Some(h.clone())))
        .collect();
    if kg_items.is_empty() && web_items.is_empty() {
        return Decision {
            label: VerdictLabel::Questionable,
            evidence: Vec::new(),
            notes: vec![VerdictNote::Unattributed],
        };
    }

    let mut failures = 0;
    let mut evidence = Vec::new();
    let mut pool = web_items;
    if kg_items.len() == 1 {
        let (mut first, failed) = classify_all(claim, kg_items, judge);
        failures += failed;
        match first.pop() {
            Some(item) if item.is_supporting() => {
                return Decision {
                    label: VerdictLabel::StronglySupported,
                    evidence: vec![item],
                    notes,
                };
            }
            Some(item) => {
                notes.push(VerdictNote::KgContradicted);
                evidence.push(item);
                if config.strict_step1 {
                    return Decision {
                        label: VerdictLabel::Questionable,
                        evidence,
                        notes,
                    };
                }
            }
            None => {}
        }
    } else {
        pool = kg_items.into_iter().chain(pool).collect();
    }

    let (classified, failed) = classify_all(claim, pool, judge);
    failures += failed;
    evidence.extend(classified);
    if failures > 0 {
        notes.push(VerdictNote::JudgeFailures { count: failures });
    }
    let label = if evidence.iter().any(ClassifiedEvidence::is_supporting) {
        VerdictLabel::LikelySupported
    } else {
        VerdictLabel::Questionable
    };
    Decision {
        label,
        evidence,
        notes,
    }
}
