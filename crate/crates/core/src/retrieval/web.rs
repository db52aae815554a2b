use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::{RetrievalError, WebAdapter};
use crate::model::WebHit;
use crate::normalize::normalize_text;
use crate::qgen::GeneratedQuestion;

/// Recorded search results keyed by normalized question text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WebFixture {
    entries: BTreeMap<String, Vec<WebHit>>,
}

impl WebFixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(json: &str) -> Result<Self, RetrievalError> {
        let raw: BTreeMap<String, Vec<WebHit>> =
            serde_json::from_str(json).map_err(|e| RetrievalError::FixtureLoad(e.to_string()))?;
        let mut out = WebFixture::new();
        for (q, hits) in raw {
            out.entries.entry(normalize_text(&q)).or_default().extend(hits);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| RetrievalError::FixtureLoad(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn insert(&mut self, question: &str, hits: Vec<WebHit>) {
        self.entries.insert(normalize_text(question), hits);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl WebAdapter for WebFixture {
    fn search(&self, q: &GeneratedQuestion, k: usize) -> Result<Vec<WebHit>, RetrievalError> {
        match self.entries.get(&normalize_text(&q.question)) {
            Some(hits) => Ok(hits.iter().take(k).cloned().collect()),
            None => {
                log::warn!("web fixture has no entry for {:?}", q.question);
                Ok(Vec::new())
            }
        }
    }
}
