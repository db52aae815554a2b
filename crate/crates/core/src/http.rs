//! Blocking JSON-over-HTTP plumbing shared by the LLM and evidence adapters.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::thread;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    /// Network failures, timeouts, 429 and 5xx. Worth retrying.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("request failed: {0}")]
    Fatal(String),
}

impl HttpError {
    pub fn is_transient(&self) -> bool {
        matches!(self, HttpError::Transient(_))
    }
}

/// Attempts are `1 + max_retries`; the wait before retry `i` (0-based) is
/// `backoff_ms * 2^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_ms: 1000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1u64 << retry.min(20)))
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(timeout: Duration, retry: RetryPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        JsonClient {
            agent: ureq::Agent::new_with_config(config),
            retry,
        }
    }

    /// POST `body` and parse the JSON response, retrying transient failures.
    pub fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<Value, HttpError> {
        let mut retry = 0;
        loop {
            match self.post_once(url, headers, body) {
                Err(e) if e.is_transient() && retry < self.retry.max_retries => {
                    let wait = self.retry.delay(retry);
                    log::warn!("POST {url} failed ({e}); retrying in {wait:?}");
                    thread::sleep(wait);
                    retry += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> Result<Value, HttpError> {
        let mut req = self.agent.post(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.send_json(body).map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(HttpError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(HttpError::Fatal(format!("HTTP {status}")));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| HttpError::Fatal(format!("invalid JSON response: {e}")))
    }
}

fn classify(e: ureq::Error) -> HttpError {
    match e {
        ureq::Error::Io(_)
        | ureq::Error::Timeout(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed
        | ureq::Error::Protocol(_) => HttpError::Transient(e.to_string()),
        other => HttpError::Fatal(other.to_string()),
    }
}

/// Follows a dot-separated path (`"choices.0.text"`); numeric segments index
/// arrays. An empty path returns the value itself.
pub fn lookup_path<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|seg| !seg.is_empty())
        .try_fold(value, |v, seg| match v {
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
            Value::Object(map) => map.get(seg),
            _ => None,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn paths() {
        let v = json!({"choices": [{"text": "hi"}], "a": {"b": 3}});
        assert_eq!(lookup_path(&v, "choices.0.text"), Some(&json!("hi")));
        assert_eq!(lookup_path(&v, "a.b"), Some(&json!(3)));
        assert_eq!(lookup_path(&v, "choices.1.text"), None);
        assert_eq!(lookup_path(&v, ""), Some(&v));
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        let waits: Vec<u64> = (0..3).map(|i| p.delay(i).as_millis() as u64).collect();
        assert_eq!(waits, [1000, 2000, 4000]);
    }
}
