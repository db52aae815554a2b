use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use super::{dedup_answers, KgAdapter, KgAnswerSet, RetrievalError};
use crate::model::Triple;
use crate::normalize::normalize_text;
use crate::qgen::GeneratedQuestion;

pub const INSTANCE_OF: &str = "instance_of";

/// A local triple store: fact rows, `instance_of` type rows, and a predicate
/// alias map.
#[derive(Debug, Clone, Default)]
pub struct KgSnapshot {
    rows: Vec<[String; 3]>,
    aliases: BTreeMap<String, String>,
    index: HashMap<(String, String), Vec<usize>>,
}

fn split_row<const N: usize>(line: &str, lineno: usize) -> Result<[String; N], RetrievalError> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != N {
        return Err(RetrievalError::SnapshotLoad(format!(
            "line {lineno}: expected {N} tab-separated columns, found {}",
            fields.len()
        )));
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(RetrievalError::SnapshotLoad(format!("line {lineno}: empty field")));
    }
    Ok(std::array::from_fn(|i| fields[i].to_string()))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

impl KgSnapshot {
    /// Parses the fact TSV and the optional alias TSV.
    pub fn parse(facts: &str, aliases: Option<&str>) -> Result<Self, RetrievalError> {
        let mut alias_map = BTreeMap::new();
        if let Some(text) = aliases {
            for (lineno, line) in data_lines(text) {
                let [alias, canonical] = split_row::<2>(line, lineno)?;
                alias_map.insert(normalize_text(&alias), normalize_text(&canonical));
            }
        }
        if let Some((alias, target)) = alias_map.iter().find(|(_, t)| alias_map.contains_key(*t)) {
            return Err(RetrievalError::SnapshotLoad(format!(
                "alias `{alias}` points at `{target}`, which is itself an alias"
            )));
        }
        let mut snap = KgSnapshot {
            aliases: alias_map,
            ..Default::default()
        };
        for (lineno, line) in data_lines(facts) {
            let row = split_row::<3>(line, lineno)?;
            let key = (normalize_text(&row[0]), snap.canonical_predicate(&row[1]));
            snap.index.entry(key).or_default().push(snap.rows.len());
            snap.rows.push(row);
        }
        Ok(snap)
    }

    pub fn load(facts: &Path, aliases: Option<&Path>) -> Result<Self, RetrievalError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| RetrievalError::SnapshotLoad(format!("{}: {e}", p.display())))
        };
        let facts = read(facts)?;
        let aliases = aliases.map(read).transpose()?;
        Self::parse(&facts, aliases.as_deref())
    }

    pub fn canonical_predicate(&self, predicate: &str) -> String {
        let p = normalize_text(predicate);
        self.aliases.get(&p).cloned().unwrap_or(p)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Objects stored for `(subject, predicate)`, deduplicated by value, in
    /// file order.
    pub fn lookup(&self, subject: &str, predicate: &str) -> Vec<String> {
        let key = (normalize_text(subject), self.canonical_predicate(predicate));
        let rows = self.index.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        dedup_answers(rows.iter().map(|&i| self.rows[i][2].clone()))
    }

    /// Lookup key for a triple: extended triples use `predicate attr`.
    pub fn lookup_triple(&self, t: &Triple) -> Vec<String> {
        match &t.predicate_attr {
            Some(attr) => self.lookup(&t.subject, &format!("{} {}", t.predicate, attr)),
            None => self.lookup(&t.subject, &t.predicate),
        }
    }

    /// Types of `entity`, in file order.
    pub fn types_of(&self, entity: &str) -> Vec<String> {
        self.lookup(entity, INSTANCE_OF)
    }

    /// Entities with an `instance_of` row for `ty`, in file order.
    pub fn entities_of_type(&self, ty: &str) -> Vec<String> {
        let ty = normalize_text(ty);
        let mut out: Vec<String> = Vec::new();
        for row in &self.rows {
            if self.canonical_predicate(&row[1]) == INSTANCE_OF
                && normalize_text(&row[2]) == ty
                && !out.iter().any(|e| normalize_text(e) == normalize_text(&row[0]))
            {
                out.push(row[0].clone());
            }
        }
        out
    }
}

/// KG adapter over a [`KgSnapshot`]. Ignores the question text and looks up
/// the triple's subject and predicate.
#[derive(Debug, Clone)]
pub struct SnapshotKg {
    snapshot: Arc<KgSnapshot>,
}

impl SnapshotKg {
    pub fn new(snapshot: Arc<KgSnapshot>) -> Self {
        SnapshotKg { snapshot }
    }
}

impl KgAdapter for SnapshotKg {
    fn query(&self, q: &GeneratedQuestion) -> Result<KgAnswerSet, RetrievalError> {
        Ok(KgAnswerSet {
            answers: self.snapshot.lookup_triple(&q.triple),
            source: "snapshot".to_string(),
        })
    }
}
