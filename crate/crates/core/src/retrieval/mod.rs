//! Evidence sources: a knowledge-graph QA adapter and a web-search adapter,
//! each with a local (snapshot / fixture) and an HTTP implementation.

mod http;
mod snapshot;
mod web;

pub use self::http::{HttpKg, HttpKgConfig, HttpWeb, HttpWebConfig};
pub use self::snapshot::{KgSnapshot, SnapshotKg};
pub use self::web::WebFixture;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::model::WebHit;
use crate::qgen::GeneratedQuestion;

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("snapshot load failed: {0}")]
    SnapshotLoad(String),
    #[error("web fixture load failed: {0}")]
    FixtureLoad(String),
    #[error("evidence backend unavailable: {message}")]
    BackendUnavailable { message: String, retriable: bool },
    #[error("k must be at least 1")]
    ZeroK,
}

/// Answers from the KG adapter: none, one, or a list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgAnswerSet {
    pub answers: Vec<String>,
    pub source: String,
}

pub trait KgAdapter: Send + Sync + fmt::Debug {
    fn query(&self, q: &GeneratedQuestion) -> Result<KgAnswerSet, RetrievalError>;
}

/// Ranked web hits. Implementations may return more than `k`; callers go
/// through [`query_web`], which validates and truncates.
pub trait WebAdapter: Send + Sync + fmt::Debug {
    fn search(&self, q: &GeneratedQuestion, k: usize) -> Result<Vec<WebHit>, RetrievalError>;
}

pub fn query_kg(
    q: &GeneratedQuestion,
    adapter: &dyn KgAdapter,
) -> Result<KgAnswerSet, RetrievalError> {
    adapter.query(q)
}

/// At most `k` valid hits in rank order. Hits whose short answer is not in
/// their passage, or that lack a link, are dropped.
pub fn query_web(
    q: &GeneratedQuestion,
    k: usize,
    adapter: &dyn WebAdapter,
) -> Result<Vec<WebHit>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    let hits = adapter.search(q, k)?;
    Ok(hits
        .into_iter()
        .filter(|h| {
            let ok = h.is_valid();
            if !ok {
                log::warn!("dropping invalid web hit from {:?}", h.source_link);
            }
            ok
        })
        .take(k)
        .collect())
}

/// Removes later answers that normalize to an earlier one.
pub(crate) fn dedup_answers(answers: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for a in answers {
        let a = a.trim().to_string();
        if a.is_empty() {
            continue;
        }
        let key = crate::normalize::normalize_value(&a);
        if !seen.contains(&key) {
            seen.push(key);
            out.push(a);
        }
    }
    out
}
