//! Evidence-grounded rewrites of sentences containing Questionable facts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extraction::{align_span, extract_facts};
use crate::llm::{Gateway, TaskKind};
use crate::model::{same_fact, EvidenceTriple, Triple, Verdict, VerdictLabel};
use crate::normalize::{normalize_value, values_equal};
use crate::text::{char_slice, find_ci, find_ci_from, mentions_value};

/// Surface approximations of the three entailment conditions a rewrite must
/// meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionCheckResult {
    /// The rewrite no longer states the questionable fact.
    pub drops_src: bool,
    /// The rewrite states the correction.
    pub adds_dest: bool,
    /// Every other fact of the sentence survives.
    pub preserves_others: bool,
}

impl RevisionCheckResult {
    pub fn passed(&self) -> bool {
        self.drops_src && self.adds_dest && self.preserves_others
    }

    fn and(self, other: RevisionCheckResult) -> RevisionCheckResult {
        RevisionCheckResult {
            drops_src: self.drops_src && other.drops_src,
            adds_dest: self.adds_dest && other.adds_dest,
            preserves_others: self.preserves_others && other.preserves_others,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub src: Triple,
    pub dest: EvidenceTriple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionProposal {
    pub original: String,
    pub revised: String,
    pub src: Triple,
    pub dest: EvidenceTriple,
    pub checks: RevisionCheckResult,
    /// For a rewrite correcting several facts at once, every substitution
    /// (the first one repeats `src`/`dest`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joint: Vec<Substitution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RevisionNote {
    /// The fact is Questionable but nothing was retrieved to correct it with.
    NoCandidateCorrection { triple: Triple },
    /// The gateway call for one proposal failed.
    ProposalFailed { triple: Triple, message: String },
    /// A rewrite came back but failed the checks.
    ProposalRejected {
        triple: Triple,
        revised: String,
        checks: RevisionCheckResult,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRevisions {
    pub proposals: Vec<RevisionProposal>,
    pub notes: Vec<RevisionNote>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisionConfig {
    /// Rewrite several Questionable facts of one sentence in a single call
    /// per combination of candidate values.
    pub joint: bool,
    /// Joint rewriting is used only up to this many combinations.
    pub max_combinations: usize,
    /// After the surface checks pass, also re-extract facts from the rewrite
    /// and require them to agree. Costs one more gateway call per proposal.
    pub llm_check: bool,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig {
            joint: true,
            max_combinations: 8,
            llm_check: false,
        }
    }
}

/// Does `s_prime` have `dest.object` where `s` had `src.object`?
fn replaced_at_span(s: &str, s_prime: &str, src: &Triple, dest: &EvidenceTriple) -> bool {
    let Ok(span) = align_span(s, src) else {
        return false;
    };
    let prefix = char_slice(s, 0, span.start);
    if !char_slice(s_prime, 0, span.start).eq_ignore_ascii_case(prefix) {
        return false;
    }
    find_ci_from(s_prime, dest.triple.object.trim(), span.start)
        .is_some_and(|(start, _)| start == span.start)
}

fn preserved(s: &str, s_prime: &str, t: &Triple) -> bool {
    match align_span(s, t) {
        Ok(span) => find_ci(s_prime, span.slice(s)).is_some(),
        Err(_) => mentions_value(s_prime, &t.object),
    }
}

/// Deterministic gate on a rewrite. `others` are the sentence's remaining
/// facts.
pub fn check_revision(
    s: &str,
    s_prime: &str,
    src: &Triple,
    dest: &EvidenceTriple,
    others: &[Triple],
) -> RevisionCheckResult {
    RevisionCheckResult {
        drops_src: !mentions_value(s_prime, &src.object) || replaced_at_span(s, s_prime, src, dest),
        adds_dest: mentions_value(s_prime, &dest.triple.object),
        preserves_others: others.iter().all(|t| preserved(s, s_prime, t)),
    }
}

pub fn revision_payload(s: &str, subs: &[Substitution]) -> String {
    let mut out = format!("Sentence: {s}");
    for sub in subs {
        out.push_str(&format!("\nQuestionable: {}\nCorrection: {}", sub.src, sub.dest.triple));
    }
    out
}

/// First non-empty line, without surrounding quotes.
pub fn parse_revision_output(output: &str) -> Option<String> {
    let line = output.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = line
        .trim_matches(|c| matches!(c, '"' | '\'' | '\u{201c}' | '\u{201d}'))
        .trim();
    (!line.is_empty()).then(|| line.to_string())
}

/// Distinct evidence values that differ from the claim, in evidence order
/// (KG first, then web rank).
pub fn candidate_corrections(v: &Verdict) -> Vec<EvidenceTriple> {
    let src = normalize_value(&v.triple.object);
    let mut seen = vec![src];
    let mut out = Vec::new();
    for e in &v.evidence {
        let key = normalize_value(&e.evidence.triple.object);
        if !seen.contains(&key) {
            seen.push(key);
            out.push(e.evidence.clone());
        }
    }
    out
}

fn combinations(lists: &[Vec<EvidenceTriple>]) -> Vec<Vec<&EvidenceTriple>> {
    lists.iter().fold(vec![Vec::new()], |acc, list| {
        acc.iter()
            .flat_map(|prefix| {
                list.iter().map(move |e| {
                    let mut next = prefix.clone();
                    next.push(e);
                    next
                })
            })
            .collect()
    })
}

/// Proposals for one sentence given its verdicts.
pub fn propose_revisions(
    s: &str,
    verdicts: &[Verdict],
    gw: &Gateway,
    config: RevisionConfig,
) -> SentenceRevisions {
    let mut notes = Vec::new();
    let mut targets: Vec<(&Verdict, Vec<EvidenceTriple>)> = Vec::new();
    for v in verdicts.iter().filter(|v| v.label == VerdictLabel::Questionable) {
        if v.evidence.is_empty() {
            notes.push(RevisionNote::NoCandidateCorrection {
                triple: v.triple.clone(),
            });
            continue;
        }
        let candidates = candidate_corrections(v);
        if !candidates.is_empty() {
            targets.push((v, candidates));
        }
    }

    let combos: usize = targets.iter().map(|(_, c)| c.len()).product();
    let jobs: Vec<Vec<Substitution>> =
        if config.joint && targets.len() >= 2 && combos <= config.max_combinations {
            let lists: Vec<_> = targets.iter().map(|(_, c)| c.clone()).collect();
            combinations(&lists)
                .into_iter()
                .map(|combo| {
                    targets
                        .iter()
                        .zip(combo)
                        .map(|((v, _), dest)| Substitution {
                            src: v.triple.clone(),
                            dest: dest.clone(),
                        })
                        .collect()
                })
                .collect()
        } else {
            targets
                .iter()
                .flat_map(|(v, cands)| {
                    cands.iter().map(|dest| {
                        vec![Substitution {
                            src: v.triple.clone(),
                            dest: dest.clone(),
                        }]
                    })
                })
                .collect()
        };

    let results: Vec<Result<RevisionProposal, RevisionNote>> = jobs
        .into_par_iter()
        .map(|subs| run_job(s, verdicts, subs, gw, config.llm_check))
        .collect();
    let mut proposals = Vec::new();
    for r in results {
        match r {
            Ok(p) => proposals.push(p),
            Err(n) => notes.push(n),
        }
    }
    SentenceRevisions { proposals, notes }
}

/// The three conditions judged on facts extracted from the rewrite.
pub fn extracted_checks(
    facts: &[Triple],
    src: &Triple,
    dest: &EvidenceTriple,
    others: &[Triple],
) -> RevisionCheckResult {
    let states = |t: &Triple| {
        facts.iter().any(|f| {
            same_fact(f, t)
                || (values_equal(&f.subject, &t.subject) && values_equal(&f.object, &t.object))
        })
    };
    RevisionCheckResult {
        drops_src: !values_equal(&src.object, &dest.triple.object) && !facts.iter().any(|f| same_fact(f, src)),
        adds_dest: states(&dest.triple),
        preserves_others: others.iter().all(|t| states(t)),
    }
}

fn run_job(
    s: &str,
    verdicts: &[Verdict],
    subs: Vec<Substitution>,
    gw: &Gateway,
    llm_check: bool,
) -> Result<RevisionProposal, RevisionNote> {
    let head = subs[0].clone();
    let failed = |message: String| RevisionNote::ProposalFailed {
        triple: head.src.clone(),
        message,
    };
    let output = gw
        .complete(TaskKind::Revision, &revision_payload(s, &subs))
        .map_err(|e| failed(e.to_string()))?;
    let revised = parse_revision_output(&output).ok_or_else(|| failed("empty rewrite".into()))?;
    let others: Vec<Triple> = verdicts
        .iter()
        .map(|v| v.triple.clone())
        .filter(|t| !subs.iter().any(|sub| sub.src == *t))
        .collect();
    let checks = subs
        .iter()
        .map(|sub| check_revision(s, &revised, &sub.src, &sub.dest, &others))
        .reduce(RevisionCheckResult::and)
        .expect("at least one substitution");
    let checks = if llm_check && checks.passed() {
        let extracted = extract_facts(0, &revised, gw).map_err(|e| failed(e.to_string()))?;
        let facts: Vec<Triple> = extracted.facts.iter().cloned().collect();
        subs.iter()
            .map(|sub| extracted_checks(&facts, &sub.src, &sub.dest, &others))
            .fold(checks, RevisionCheckResult::and)
    } else {
        checks
    };
    if !checks.passed() {
        return Err(RevisionNote::ProposalRejected {
            triple: head.src,
            revised,
            checks,
        });
    }
    Ok(RevisionProposal {
        original: s.to_string(),
        revised,
        src: head.src,
        dest: head.dest,
        checks,
        joint: if subs.len() > 1 { subs } else { Vec::new() },
    })
}
