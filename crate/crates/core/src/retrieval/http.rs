//! HTTP evidence adapters. Request and response shapes are configurable:
//! the request is a flat JSON object, and answers are read from the response
//! with dot-separated field paths.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::time::Duration;

use super::{dedup_answers, KgAdapter, KgAnswerSet, RetrievalError, WebAdapter};
use crate::http::{lookup_path, HttpError, JsonClient, RetryPolicy};
use crate::model::WebHit;
use crate::qgen::GeneratedQuestion;

fn unavailable(e: HttpError) -> RetrievalError {
    RetrievalError::BackendUnavailable {
        retriable: e.is_transient(),
        message: e.to_string(),
    }
}

fn auth_headers(token_env: &Option<String>) -> Vec<(String, String)> {
    token_env
        .as_deref()
        .and_then(|var| std::env::var(var).ok())
        .map(|tok| vec![("Authorization".to_string(), format!("Bearer {tok}"))])
        .unwrap_or_default()
}

fn default_timeout() -> u64 {
    30
}

/// KGQA endpoint: `POST url {question_field: question}`; the response holds
/// an array of answers at `answers_path`. Array items may be strings or
/// objects carrying the string at `answer_field`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpKgConfig {
    pub url: String,
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "HttpKgConfig::default_question_field")]
    pub question_field: String,
    #[serde(default = "HttpKgConfig::default_answers_path")]
    pub answers_path: String,
    #[serde(default)]
    pub answer_field: Option<String>,
}

impl HttpKgConfig {
    fn default_question_field() -> String {
        "question".into()
    }

    fn default_answers_path() -> String {
        "answers".into()
    }

    pub fn new(url: impl Into<String>) -> Self {
        HttpKgConfig {
            url: url.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            question_field: Self::default_question_field(),
            answers_path: Self::default_answers_path(),
            answer_field: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpKg {
    config: HttpKgConfig,
    client: JsonClient,
}

impl HttpKg {
    pub fn new(config: HttpKgConfig) -> Self {
        let client = JsonClient::new(Duration::from_secs(config.timeout_secs), config.retry);
        HttpKg { config, client }
    }
}

fn field_str<'a>(v: &'a Value, field: &Option<String>) -> Option<&'a str> {
    match field {
        Some(f) => lookup_path(v, f)?.as_str(),
        None => v.as_str(),
    }
}

impl KgAdapter for HttpKg {
    fn query(&self, q: &GeneratedQuestion) -> Result<KgAnswerSet, RetrievalError> {
        let mut body = Map::new();
        body.insert(self.config.question_field.clone(), Value::from(q.question.as_str()));
        let resp = self
            .client
            .post(&self.config.url, &auth_headers(&self.config.token_env), &Value::Object(body))
            .map_err(unavailable)?;
        let answers = match lookup_path(&resp, &self.config.answers_path) {
            Some(Value::Array(items)) => items
                .iter()
                .filter_map(|v| field_str(v, &self.config.answer_field))
                .map(str::to_string)
                .collect(),
            Some(Value::Null) | None => Vec::new(),
            Some(other) => {
                return Err(RetrievalError::BackendUnavailable {
                    message: format!("expected an array at `{}`, got {other}", self.config.answers_path),
                    retriable: false,
                })
            }
        };
        Ok(KgAnswerSet {
            answers: dedup_answers(answers),
            source: self.config.url.clone(),
        })
    }
}

/// Search endpoint: `POST url {query_field: question, k_field: k}`; ranked
/// results are an array at `results_path`, each an object with the passage,
/// highlighted short answer and link at the configured field paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpWebConfig {
    pub url: String,
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "HttpWebConfig::default_query_field")]
    pub query_field: String,
    #[serde(default = "HttpWebConfig::default_k_field")]
    pub k_field: String,
    #[serde(default = "HttpWebConfig::default_results_path")]
    pub results_path: String,
    #[serde(default = "HttpWebConfig::default_passage_field")]
    pub passage_field: String,
    #[serde(default = "HttpWebConfig::default_answer_field")]
    pub answer_field: String,
    #[serde(default = "HttpWebConfig::default_link_field")]
    pub link_field: String,
}

impl HttpWebConfig {
    fn default_query_field() -> String {
        "q".into()
    }
    fn default_k_field() -> String {
        "k".into()
    }
    fn default_results_path() -> String {
        "results".into()
    }
    fn default_passage_field() -> String {
        "passage".into()
    }
    fn default_answer_field() -> String {
        "short_answer".into()
    }
    fn default_link_field() -> String {
        "url".into()
    }

    pub fn new(url: impl Into<String>) -> Self {
        HttpWebConfig {
            url: url.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            query_field: Self::default_query_field(),
            k_field: Self::default_k_field(),
            results_path: Self::default_results_path(),
            passage_field: Self::default_passage_field(),
            answer_field: Self::default_answer_field(),
            link_field: Self::default_link_field(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpWeb {
    config: HttpWebConfig,
    client: JsonClient,
}

impl HttpWeb {
    pub fn new(config: HttpWebConfig) -> Self {
        let client = JsonClient::new(Duration::from_secs(config.timeout_secs), config.retry);
        HttpWeb { config, client }
    }
}

impl WebAdapter for HttpWeb {
    fn search(&self, q: &GeneratedQuestion, k: usize) -> Result<Vec<WebHit>, RetrievalError> {
        let c = &self.config;
        let mut body = Map::new();
        body.insert(c.query_field.clone(), Value::from(q.question.as_str()));
        body.insert(c.k_field.clone(), Value::from(k));
        let resp = self
            .client
            .post(&c.url, &auth_headers(&c.token_env), &Value::Object(body))
            .map_err(unavailable)?;
        let Some(Value::Array(items)) = lookup_path(&resp, &c.results_path) else {
            return Ok(Vec::new());
        };
        let get = |v: &Value, path: &str| {
            lookup_path(v, path)
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string()
        };
        Ok(items
            .iter()
            .map(|v| WebHit {
                passage: get(v, &c.passage_field),
                short_answer: get(v, &c.answer_field),
                source_link: get(v, &c.link_field),
            })
            .collect())
    }
}
