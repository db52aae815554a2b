//! Generic completion endpoint: `POST {model, prompt, max_tokens}` and read
//! the generated text at a configurable JSON path.

use serde::{Deserialize, Serialize};
use serde_json::json;
use std::time::Duration;

use super::{GatewayError, LlmBackend};
use crate::http::{lookup_path, HttpError, JsonClient, RetryPolicy};

pub const ENV_URL: &str = "FACTFORGE_LLM_URL";
pub const ENV_TOKEN: &str = "FACTFORGE_LLM_TOKEN";
pub const ENV_MODEL: &str = "FACTFORGE_LLM_MODEL";

fn default_token_env() -> String {
    ENV_TOKEN.to_string()
}
fn default_timeout() -> u64 {
    60
}
fn default_max_tokens() -> u32 {
    256
}
fn default_text_path() -> String {
    "text".to_string()
}

/// The token itself is never stored here; only the name of the environment
/// variable holding it, read at request time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub url: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_text_path")]
    pub text_path: String,
}

impl HttpBackendConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpBackendConfig {
            url: url.into(),
            model: model.into(),
            token_env: default_token_env(),
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            max_tokens: default_max_tokens(),
            text_path: default_text_path(),
        }
    }

    /// `FACTFORGE_LLM_URL` and `FACTFORGE_LLM_MODEL`, if the URL is set.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_URL).ok().filter(|u| !u.trim().is_empty())?;
        let model = std::env::var(ENV_MODEL).unwrap_or_default();
        Some(Self::new(url, model))
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: JsonClient,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let client = JsonClient::new(Duration::from_secs(config.timeout_secs), config.retry);
        HttpBackend { config, client }
    }
}

impl LlmBackend for HttpBackend {
    fn complete_prompt(&self, prompt: &str) -> Result<String, GatewayError> {
        let mut headers = Vec::new();
        if let Ok(token) = std::env::var(&self.config.token_env) {
            headers.push(("Authorization".to_string(), format!("Bearer {token}")));
        }
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": self.config.max_tokens,
        });
        let resp = self
            .client
            .post(&self.config.url, &headers, &body)
            .map_err(|e| GatewayError::BackendUnavailable {
                retriable: matches!(e, HttpError::Transient(_)),
                message: e.to_string(),
            })?;
        match lookup_path(&resp, &self.config.text_path) {
            Some(serde_json::Value::String(text)) => Ok(text.clone()),
            _ => Err(GatewayError::BackendUnavailable {
                message: format!("response has no text at `{}`", self.config.text_path),
                retriable: false,
            }),
        }
    }

    fn name(&self) -> &str {
        "http"
    }
}
