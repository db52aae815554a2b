use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::sync::Arc;
use tower::ServiceExt;

use factforge_cli::server::router;
use factforge_core::demo;
use factforge_core::llm::{GatewayError, LlmBackend};
use factforge_core::model::{VerdictLabel, VerificationReport};
use factforge_core::pipeline::Engine;
use factforge_core::retrieval::SnapshotKg;
use factforge_core::PipelineConfig;

async fn call(app: Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    // Extractor rejections come back as plain text.
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, value)
}

fn app() -> Router {
    router(Engine::demo(), &[])
}

#[derive(Debug)]
struct Down;

impl LlmBackend for Down {
    fn complete_prompt(&self, _: &str) -> Result<String, GatewayError> {
        Err(GatewayError::BackendUnavailable {
            message: "connection refused".into(),
            retriable: true,
        })
    }

    fn name(&self) -> &str {
        "down"
    }
}

fn down_app() -> Router {
    let kg = Arc::new(SnapshotKg::new(Arc::new(demo::kg_snapshot())));
    let engine = Engine::from_parts(PipelineConfig::demo(), Arc::new(Down), kg, None).unwrap();
    router(engine, &[])
}

async fn verify(text: &str) -> VerificationReport {
    let (status, body) = call(app(), "POST", "/api/verify", Some(json!({ "text": text }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    serde_json::from_value(body).unwrap()
}

#[tokio::test]
async fn health_reports_version_and_digest() {
    let (status, body) = call(app(), "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["config_digest"], Engine::demo().digest());
}

#[tokio::test]
async fn ask_returns_model_text() {
    let (status, body) = call(app(), "POST", "/api/ask", Some(json!({ "query": demo::ASK_QUERY }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["response_text"], "Taylor Swift is 30 years old.");
}

#[tokio::test]
async fn ask_empty_is_400() {
    let (status, _) = call(app(), "POST", "/api/ask", Some(json!({ "query": "  " }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn ask_backend_down_is_502_retriable() {
    let (status, body) = call(down_app(), "POST", "/api/ask", Some(json!({ "query": "anything" }))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["retriable"], true);
}

#[tokio::test]
async fn verify_backend_down_is_502() {
    let (status, _) = call(down_app(), "POST", "/api/verify", Some(json!({ "text": demo::PASSAGES[1] }))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
}

#[tokio::test]
async fn verify_states_example() {
    let report = verify(demo::PASSAGES[0]).await;
    let verdicts: Vec<_> = report.passage_verdicts().collect();
    assert_eq!(verdicts.len(), 2);
    assert_eq!(verdicts[0].0.slice(&report.passage), "North America");
    assert_ne!(verdicts[0].1.label, VerdictLabel::Questionable);
    assert_eq!(verdicts[1].0.slice(&report.passage), "51");
    assert_eq!(verdicts[1].1.label, VerdictLabel::Questionable);
    assert!(verdicts[1].1.evidence.iter().any(|e| e.evidence.triple.object == "50"));
    assert!(!report.provenance.config_digest.is_empty());
    assert!(report.complete);
}

#[tokio::test]
async fn verify_whitespace_is_400() {
    let (status, _) = call(app(), "POST", "/api/verify", Some(json!({ "text": " \n\t" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn verify_malformed_body_is_client_error() {
    let (status, _) = call(app(), "POST", "/api/verify", Some(json!({ "txt": "x" }))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn verify_with_overrides_records_them() {
    let body = json!({ "text": demo::PASSAGES[1], "overrides": { "top_k": 1, "strict_step1": true } });
    let (status, body) = call(app(), "POST", "/api/verify", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let report: VerificationReport = serde_json::from_value(body).unwrap();
    let o = report.provenance.overrides.clone().unwrap();
    assert_eq!(o.top_k, Some(1));
    // The override-aware report can still be revised.
    let (status, out) = call(app(), "POST", "/api/revise", Some(json!({ "report": report }))).await;
    assert_eq!(status, StatusCode::OK, "{out}");
}

#[tokio::test]
async fn revise_age_example() {
    let report = verify(demo::PASSAGES[1]).await;
    let (status, body) = call(app(), "POST", "/api/revise", Some(json!({ "report": report }))).await;
    assert_eq!(status, StatusCode::OK);
    let proposals: Vec<&Value> = body["sentences"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["proposals"].as_array().unwrap())
        .collect();
    assert_eq!(proposals.len(), 1);
    assert_eq!(proposals[0]["revised"], "Taylor Swift is 33 years old.");
}

#[tokio::test]
async fn revise_digest_mismatch_is_409() {
    let mut report = verify(demo::PASSAGES[1]).await;
    report.provenance.config_digest = "0".repeat(64);
    let (status, _) = call(app(), "POST", "/api/revise", Some(json!({ "report": report }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn revise_without_questionable_is_422() {
    let report = verify(demo::PASSAGES[2]).await;
    let (status, _) = call(app(), "POST", "/api/revise", Some(json!({ "report": report }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn revise_without_evidence_notes_no_candidate() {
    let mut report = verify(demo::PASSAGES[1]).await;
    for s in &mut report.sentences {
        for v in &mut s.verdicts {
            v.evidence.clear();
        }
    }
    let (status, body) = call(app(), "POST", "/api/revise", Some(json!({ "report": report }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let sentences = body["sentences"].as_array().unwrap();
    assert!(sentences.iter().all(|s| s["proposals"].as_array().unwrap().is_empty()));
    let notes: Vec<&Value> = sentences.iter().flat_map(|s| s["notes"].as_array().unwrap()).collect();
    assert!(notes.iter().any(|n| n["kind"] == "no_candidate_correction"), "{notes:?}");
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let app = router(Engine::demo(), &["http://localhost:5173".to_string()]);
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/verify")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers().get("access-control-allow-origin").unwrap(),
        "http://localhost:5173"
    );
}
