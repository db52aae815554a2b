//! Same-type entity substitution over a KG snapshot.
//!
//! Randomness: a ChaCha8 stream seeded with `seed_from_u64(seed)`; instance
//! `i` of a corpus uses stream `i`. A uniform index below `n` is the high 64
//! bits of `next_u64() * n`. One draw picks the link among the eligible
//! ones, a second picks the replacement among its candidates (file order).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{AnnotatedInstance, BenchmarkError, GoldFact, InstanceProvenance, PerturbationRecord};
use crate::model::{CharSpan, Triple, VerdictLabel};
use crate::normalize::{normalize_text, values_equal};
use crate::retrieval::KgSnapshot;
use crate::text::{char_len, char_slice};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub start: usize,
    pub end: usize,
    pub entity: String,
    /// The fact the linked entity is the object of, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
}

impl Link {
    fn span(&self) -> CharSpan {
        CharSpan {
            start: self.start,
            end: self.end,
        }
    }

    fn fact(&self) -> Option<(&str, &str)> {
        Some((self.subject.as_deref()?, self.predicate.as_deref()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedSentence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub text: String,
    pub links: Vec<Link>,
}

pub fn pick_index(rng: &mut impl RngCore, n: usize) -> usize {
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

fn check_links(s: &LinkedSentence) -> Result<(), BenchmarkError> {
    let len = char_len(&s.text);
    let mut sorted: Vec<&Link> = s.links.iter().collect();
    sorted.sort_by_key(|l| l.start);
    for (i, l) in sorted.iter().enumerate() {
        if l.start >= l.end || l.end > len {
            return Err(BenchmarkError::InvalidLinks(format!(
                "link {}..{} outside text of length {len}",
                l.start, l.end
            )));
        }
        if i > 0 && sorted[i - 1].end > l.start {
            return Err(BenchmarkError::InvalidLinks("links overlap".into()));
        }
        if l.entity.trim().is_empty() {
            return Err(BenchmarkError::InvalidLinks("empty entity".into()));
        }
    }
    Ok(())
}

/// Same-type replacements for a link: entities sharing its first type,
/// excluding itself and any value the snapshot holds for the link's fact.
fn candidates(link: &Link, snapshot: &KgSnapshot) -> Option<(String, Vec<String>)> {
    let ty = snapshot.types_of(&link.entity).into_iter().next()?;
    let valid = link
        .fact()
        .map(|(s, p)| snapshot.lookup(s, p))
        .unwrap_or_default();
    let cands: Vec<String> = snapshot
        .entities_of_type(&ty)
        .into_iter()
        .filter(|e| normalize_text(e) != normalize_text(&link.entity))
        .filter(|e| !valid.iter().any(|v| values_equal(v, e)))
        .collect();
    (!cands.is_empty()).then_some((ty, cands))
}

/// Gold label of an untouched linked fact: a single agreeing KG value is
/// Strongly Supported, agreement within a list is Likely Supported, anything
/// else Questionable.
fn snapshot_label(link: &Link, subject: &str, predicate: &str, snapshot: &KgSnapshot) -> (VerdictLabel, Vec<String>) {
    let answers = snapshot.lookup(subject, predicate);
    let agreeing: Vec<String> = answers
        .iter()
        .filter(|a| values_equal(a, &link.entity))
        .cloned()
        .collect();
    if agreeing.is_empty() {
        (VerdictLabel::Questionable, answers)
    } else if answers.len() == 1 {
        (VerdictLabel::StronglySupported, agreeing)
    } else {
        (VerdictLabel::LikelySupported, agreeing)
    }
}

fn flat_triple(subject: &str, predicate: &str, object: &str) -> Option<Triple> {
    Triple::flat(subject, predicate, object).ok()
}

pub fn perturb_with_rng(
    sentence: &LinkedSentence,
    snapshot: &KgSnapshot,
    rng: &mut impl RngCore,
    source_id: &str,
) -> Result<AnnotatedInstance, BenchmarkError> {
    check_links(sentence)?;
    let eligible: Vec<(usize, String, Vec<String>)> = sentence
        .links
        .iter()
        .enumerate()
        .filter_map(|(i, l)| candidates(l, snapshot).map(|(ty, c)| (i, ty, c)))
        .collect();
    if eligible.is_empty() {
        return Err(BenchmarkError::NoEligibleLink);
    }
    let (chosen, shared_type, cands) = &eligible[pick_index(rng, eligible.len())];
    let replacement = &cands[pick_index(rng, cands.len())];
    let link = &sentence.links[*chosen];

    let text = format!(
        "{}{}{}",
        char_slice(&sentence.text, 0, link.start),
        replacement,
        char_slice(&sentence.text, link.end, char_len(&sentence.text)),
    );
    let new_end = link.start + char_len(replacement);
    let moved = |span: CharSpan| {
        if span.start >= link.end {
            CharSpan {
                start: span.start + new_end - link.end,
                end: span.end + new_end - link.end,
            }
        } else {
            span
        }
    };
    let perturbed_span = CharSpan {
        start: link.start,
        end: new_end,
    };

    let mut gold = Vec::new();
    for (i, l) in sentence.links.iter().enumerate() {
        if i == *chosen {
            let mut keys = vec![l.entity.clone()];
            if let Some((s, p)) = l.fact() {
                for v in snapshot.lookup(s, p) {
                    if !keys.iter().any(|k| values_equal(k, &v)) {
                        keys.push(v);
                    }
                }
            }
            gold.push(GoldFact {
                span: perturbed_span,
                label: VerdictLabel::Questionable,
                evidence_keys: keys,
                triple: l.fact().and_then(|(s, p)| flat_triple(s, p, replacement)),
            });
        } else if let Some((s, p)) = l.fact() {
            let (label, keys) = snapshot_label(l, s, p, snapshot);
            gold.push(GoldFact {
                span: moved(l.span()),
                label,
                evidence_keys: keys,
                triple: flat_triple(s, p, &l.entity),
            });
        }
    }
    gold.sort_by_key(|g| g.span.start);

    Ok(AnnotatedInstance {
        id: sentence.id.clone().unwrap_or_else(|| source_id.to_string()),
        text,
        gold_facts: gold,
        provenance: InstanceProvenance {
            source_id: source_id.to_string(),
            perturbation: Some(PerturbationRecord {
                span: perturbed_span,
                original_entity: link.entity.clone(),
                replacement_entity: replacement.clone(),
                shared_type: shared_type.clone(),
            }),
        },
    })
}

/// Perturbs one sentence with stream 0 of `seed`.
pub fn perturb(
    sentence: &LinkedSentence,
    snapshot: &KgSnapshot,
    seed: u64,
) -> Result<AnnotatedInstance, BenchmarkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb_with_rng(sentence, snapshot, &mut rng, sentence.id.as_deref().unwrap_or("0"))
}

/// Perturbs every sentence; sentence `i` uses stream `i` of `seed`.
/// Returns the instances and the number of sentences skipped for lack of an
/// eligible link.
pub fn perturb_corpus(
    sentences: &[LinkedSentence],
    snapshot: &KgSnapshot,
    seed: u64,
) -> Result<(Vec<AnnotatedInstance>, usize), BenchmarkError> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for (i, s) in sentences.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let source_id = s.id.clone().unwrap_or_else(|| i.to_string());
        match perturb_with_rng(s, snapshot, &mut rng, &source_id) {
            Ok(inst) => out.push(inst),
            Err(BenchmarkError::NoEligibleLink) => {
                log::warn!("sentence {source_id}: no eligible link, skipped");
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}
