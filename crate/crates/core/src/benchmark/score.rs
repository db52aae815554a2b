//! Span/label/attribution scoring of system reports against gold.
//!
//! A system verdict matches a gold fact when the spans match, the labels are
//! equal and, for Questionable or Likely Supported gold facts that name
//! evidence values, the verdict cites one of them. Matching is one-to-one,
//! greedy by descending character overlap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{AnnotatedInstance, BenchmarkError, GoldFact};
use crate::model::{CharSpan, Verdict, VerdictLabel, VerificationReport};
use crate::normalize::values_equal;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Exact,
    /// Overlap Jaccard of at least [`MatchConfig::threshold`].
    Jaccard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub mode: MatchMode,
    pub threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            mode: MatchMode::Exact,
            threshold: 0.5,
        }
    }
}

impl MatchConfig {
    pub fn jaccard() -> Self {
        MatchConfig {
            mode: MatchMode::Jaccard,
            ..Default::default()
        }
    }

    pub fn spans_match(&self, a: &CharSpan, b: &CharSpan) -> bool {
        match self.mode {
            MatchMode::Exact => a == b,
            MatchMode::Jaccard => a.jaccard(b) >= self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ov: usize,
    pub system_count: usize,
    pub gold_count: usize,
}

impl LabelScores {
    /// Precision `ov/|S|`, recall `ov/|G|`, F1 their harmonic mean; each is
    /// 0 when its denominator is 0.
    pub fn from_counts(ov: usize, system_count: usize, gold_count: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(ov, system_count);
        let recall = ratio(ov, gold_count);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        LabelScores {
            precision,
            recall,
            f1,
            ov,
            system_count,
            gold_count,
        }
    }
}

/// One row of the per-instance match table: a matched pair, or an unmatched
/// system verdict or gold fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRow {
    pub system: Option<(CharSpan, VerdictLabel)>,
    pub gold: Option<(CharSpan, VerdictLabel)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMatches {
    pub id: String,
    pub rows: Vec<MatchRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_label: BTreeMap<VerdictLabel, LabelScores>,
    pub total: LabelScores,
    pub instances: Vec<InstanceMatches>,
}

fn attributed(v: &Verdict, g: &GoldFact) -> bool {
    let needs_keys = matches!(g.label, VerdictLabel::Questionable | VerdictLabel::LikelySupported)
        && !g.evidence_keys.is_empty();
    !needs_keys
        || v.evidence.iter().any(|e| {
            g.evidence_keys
                .iter()
                .any(|k| values_equal(k, &e.evidence.triple.object))
        })
}

/// Greedy one-to-one matching of one report against one gold instance.
/// Returns matched `(system, gold)` index pairs.
pub fn score_instance(
    system: &[(CharSpan, &Verdict)],
    gold: &[GoldFact],
    config: &MatchConfig,
) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for (i, (span, v)) in system.iter().enumerate() {
        for (j, g) in gold.iter().enumerate() {
            if config.spans_match(span, &g.span) && v.label == g.label && attributed(v, g) {
                edges.push((span.overlap(&g.span), i, j));
            }
        }
    }
    edges.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_s = vec![false; system.len()];
    let mut used_g = vec![false; gold.len()];
    let mut out = Vec::new();
    for (_, i, j) in edges {
        if !used_s[i] && !used_g[j] {
            used_s[i] = true;
            used_g[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

fn pair_up<'a>(
    system: &'a [VerificationReport],
    gold: &'a [AnnotatedInstance],
) -> Result<Vec<(&'a VerificationReport, &'a AnnotatedInstance)>, BenchmarkError> {
    if system.len() == 1 && gold.len() == 1 {
        let ok = system[0].id.as_deref().is_none_or(|id| id == gold[0].id);
        if ok {
            return Ok(vec![(&system[0], &gold[0])]);
        }
    }
    let mut by_id = BTreeMap::new();
    for r in system {
        let id = r.id.as_deref().ok_or_else(|| {
            BenchmarkError::InstanceMismatch("system report without id".into())
        })?;
        if by_id.insert(id, r).is_some() {
            return Err(BenchmarkError::InstanceMismatch(format!("duplicate system id {id}")));
        }
    }
    if by_id.len() != gold.len() {
        return Err(BenchmarkError::InstanceMismatch(format!(
            "{} system reports, {} gold instances",
            by_id.len(),
            gold.len()
        )));
    }
    gold.iter()
        .map(|g| {
            by_id
                .get(g.id.as_str())
                .map(|r| (*r, g))
                .ok_or_else(|| BenchmarkError::InstanceMismatch(format!("no system report for {}", g.id)))
        })
        .collect()
}

pub fn score(
    system: &[VerificationReport],
    gold: &[AnnotatedInstance],
    config: &MatchConfig,
) -> Result<EvalReport, BenchmarkError> {
    let pairs = pair_up(system, gold)?;
    type Counts = BTreeMap<VerdictLabel, (usize, usize, usize)>;
    let per_instance: Vec<(Counts, InstanceMatches)> = pairs
        .par_iter()
        .map(|(r, g)| {
            let sys: Vec<(CharSpan, &Verdict)> = r.passage_verdicts().collect();
            let matched = score_instance(&sys, &g.gold_facts, config);
            let mut counts = Counts::new();
            for (_, v) in &sys {
                counts.entry(v.label).or_default().1 += 1;
            }
            for f in &g.gold_facts {
                counts.entry(f.label).or_default().2 += 1;
            }
            for &(i, _) in &matched {
                counts.entry(sys[i].1.label).or_default().0 += 1;
            }
            let mut rows: Vec<MatchRow> = matched
                .iter()
                .map(|&(i, j)| MatchRow {
                    system: Some((sys[i].0, sys[i].1.label)),
                    gold: Some((g.gold_facts[j].span, g.gold_facts[j].label)),
                })
                .collect();
            for (i, (span, v)) in sys.iter().enumerate() {
                if !matched.iter().any(|m| m.0 == i) {
                    rows.push(MatchRow {
                        system: Some((*span, v.label)),
                        gold: None,
                    });
                }
            }
            for (j, f) in g.gold_facts.iter().enumerate() {
                if !matched.iter().any(|m| m.1 == j) {
                    rows.push(MatchRow {
                        system: None,
                        gold: Some((f.span, f.label)),
                    });
                }
            }
            (counts, InstanceMatches { id: g.id.clone(), rows })
        })
        .collect();

    let mut totals: Counts = VerdictLabel::ALL.iter().map(|l| (*l, (0, 0, 0))).collect();
    let mut instances = Vec::new();
    for (counts, m) in per_instance {
        for (label, (ov, s, g)) in counts {
            let t = totals.entry(label).or_default();
            t.0 += ov;
            t.1 += s;
            t.2 += g;
        }
        instances.push(m);
    }
    let (ov, s, g) = totals
        .values()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(EvalReport {
        per_label: totals
            .into_iter()
            .map(|(l, (ov, s, g))| (l, LabelScores::from_counts(ov, s, g)))
            .collect(),
        total: LabelScores::from_counts(ov, s, g),
        instances,
    })
}

impl EvalReport {
    /// Aligned text table: one row per label plus the total, with precision,
    /// recall and F1 as percentages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>8} {:>8} {:>8}", "Label", "P", "R", "F1");
        let mut row = |name: &str, s: &LabelScores| {
            let _ = writeln!(
                out,
                "{:<20} {:>8.2} {:>8.2} {:>8.2}",
                name,
                100.0 * s.precision,
                100.0 * s.recall,
                100.0 * s.f1
            );
        };
        for label in VerdictLabel::ALL {
            row(&label.to_string(), &self.per_label.get(&label).copied().unwrap_or_default());
        }
        row("Total", &self.total);
        out
    }
}
