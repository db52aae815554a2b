//! Uniform access to an instructable LLM for the prompted pipeline tasks.
//!
//! The gateway renders prompts and returns raw model text. It never
//! interprets output; each consumer owns the parser for its task grammar.

mod http;
mod mock;
mod prompt;

pub use self::http::{HttpBackend, HttpBackendConfig};
pub use self::mock::{prompt_key, MockBackend, ScriptEntry};
pub use self::prompt::{
    render_prompt, Demonstration, PromptBank, PromptSettings, PromptTask, TaskKind,
};

use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("LLM backend unavailable: {message}")]
    BackendUnavailable { message: String, retriable: bool },
    #[error("mock fixture has no response for prompt key {key}")]
    FixtureMiss { key: String },
    #[error("empty payload")]
    EmptyPayload,
}

/// A completion endpoint. Implementations must be safe for concurrent calls.
pub trait LlmBackend: Send + Sync + fmt::Debug {
    fn complete_prompt(&self, prompt: &str) -> Result<String, GatewayError>;

    fn name(&self) -> &str;
}

/// Render `payload` with `task` and send it to `backend`.
pub fn complete(
    task: &PromptTask,
    payload: &str,
    backend: &dyn LlmBackend,
) -> Result<String, GatewayError> {
    if payload.trim().is_empty() {
        return Err(GatewayError::EmptyPayload);
    }
    backend.complete_prompt(&render_prompt(task, payload))
}

#[derive(Debug, Clone)]
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    bank: PromptBank,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>, bank: PromptBank) -> Self {
        Gateway { backend, bank }
    }

    pub fn complete(&self, kind: TaskKind, payload: &str) -> Result<String, GatewayError> {
        complete(self.bank.task(kind), payload, self.backend.as_ref())
    }

    /// Forward a user query verbatim, with no template.
    pub fn ask(&self, query: &str) -> Result<String, GatewayError> {
        if query.trim().is_empty() {
            return Err(GatewayError::EmptyPayload);
        }
        self.backend.complete_prompt(query)
    }

    pub fn bank(&self) -> &PromptBank {
        &self.bank
    }

    pub fn backend(&self) -> &Arc<dyn LlmBackend> {
        &self.backend
    }
}
