//! Deterministic fixture-table backend.
//!
//! The table maps the SHA-256 (lowercase hex) of a fully rendered prompt to a
//! response. A prompt without an entry is a [`GatewayError::FixtureMiss`],
//! never an empty answer.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use super::{GatewayError, LlmBackend, PromptBank, TaskKind};

pub fn prompt_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("reading fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing fixture: {0}")]
    Json(#[from] serde_json::Error),
}

/// A human-readable fixture line. `task: None` means `payload` is sent
/// verbatim (as by [`super::Gateway::ask`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub task: Option<TaskKind>,
    pub payload: String,
    pub response: String,
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    table: BTreeMap<String, String>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(table: BTreeMap<String, String>) -> Self {
        MockBackend { table }
    }

    /// Parse the fixture file format: a JSON object of prompt key to response.
    pub fn from_fixture_json(json: &str) -> Result<Self, FixtureError> {
        Ok(Self::from_map(serde_json::from_str(json)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_fixture_json(&json)
    }

    /// Compile readable script entries against the prompt templates in `bank`.
    pub fn from_script(entries: &[ScriptEntry], bank: &PromptBank) -> Self {
        let mut mock = Self::new();
        for e in entries {
            match e.task {
                Some(kind) => mock.insert(bank, kind, &e.payload, &e.response),
                None => mock.insert_prompt(&e.payload, &e.response),
            }
        }
        mock
    }

    pub fn insert_prompt(&mut self, prompt: &str, response: &str) {
        self.table.insert(prompt_key(prompt), response.to_string());
    }

    pub fn insert(&mut self, bank: &PromptBank, kind: TaskKind, payload: &str, response: &str) {
        self.insert_prompt(&bank.render(kind, payload), response);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// The fixture file form of this table, keys sorted.
    /// Adds every entry of `other`, replacing existing keys.
    pub fn merge(&mut self, other: MockBackend) {
        self.table.extend(other.table);
    }

    pub fn to_fixture_json(&self) -> String {
        serde_json::to_string_pretty(&self.table).expect("string map serializes")
    }
}

impl LlmBackend for MockBackend {
    fn complete_prompt(&self, prompt: &str) -> Result<String, GatewayError> {
        let key = prompt_key(prompt);
        match self.table.get(&key) {
            Some(response) => Ok(response.clone()),
            None => {
                let tail: String = prompt
                    .chars()
                    .rev()
                    .take(160)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .rev()
                    .collect();
                log::debug!("fixture miss {key}: ...{tail}");
                Err(GatewayError::FixtureMiss { key })
            }
        }
    }

    fn name(&self) -> &str {
        "mock"
    }
}
