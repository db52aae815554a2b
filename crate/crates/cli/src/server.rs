//! JSON-over-HTTP service: ask, verify, revise, health.

use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::time::{Duration, Instant};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use factforge_core::llm::GatewayError;
use factforge_core::model::VerificationReport;
use factforge_core::pipeline::{Engine, PipelineError, ENGINE_VERSION};
use factforge_core::ConfigOverrides;

#[derive(Debug, Deserialize)]
pub struct AskRequest {
    pub query: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AskResponse {
    pub response_text: String,
}

#[derive(Debug, Deserialize)]
pub struct VerifyRequest {
    pub text: String,
    #[serde(default)]
    pub overrides: Option<ConfigOverrides>,
}

#[derive(Debug, Deserialize)]
pub struct ReviseRequest {
    pub report: VerificationReport,
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn gateway_error(e: GatewayError) -> Response {
    let retriable = matches!(e, GatewayError::BackendUnavailable { retriable: true, .. });
    (
        StatusCode::BAD_GATEWAY,
        Json(json!({ "error": e.to_string(), "retriable": retriable })),
    )
        .into_response()
}

fn pipeline_error(e: PipelineError) -> Response {
    match e {
        PipelineError::EmptyInput | PipelineError::Config(_) => error(StatusCode::BAD_REQUEST, e),
        PipelineError::Backend(g) => gateway_error(g),
        PipelineError::BudgetExhausted(_) => (
            StatusCode::GATEWAY_TIMEOUT,
            Json(json!({ "error": e.to_string(), "partial": false })),
        )
            .into_response(),
        PipelineError::DigestMismatch { .. } => error(StatusCode::CONFLICT, e),
        PipelineError::NoQuestionable => error(StatusCode::UNPROCESSABLE_ENTITY, e),
        PipelineError::Build(_) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, Response> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| error(StatusCode::INTERNAL_SERVER_ERROR, e))
}

async fn ask(State(engine): State<Engine>, Json(req): Json<AskRequest>) -> Response {
    if req.query.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "query is empty");
    }
    match blocking(move || engine.ask(&req.query)).await {
        Ok(Ok(text)) => Json(AskResponse { response_text: text }).into_response(),
        Ok(Err(e)) => gateway_error(e),
        Err(r) => r,
    }
}

async fn verify(State(engine): State<Engine>, Json(req): Json<VerifyRequest>) -> Response {
    if req.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text is empty");
    }
    let engine = match engine.with_overrides(&req.overrides.unwrap_or_default()) {
        Ok(e) => e,
        Err(e) => return pipeline_error(e),
    };
    let budget = Duration::from_secs(engine.config().budget_secs);
    let deadline = Instant::now() + budget;
    let job = blocking(move || engine.verify_with_deadline(&req.text, deadline));
    // A backend call cannot be interrupted; stop waiting a little after the
    // deadline and answer as if nothing finished.
    match tokio::time::timeout(budget + Duration::from_secs(1), job).await {
        Ok(Ok(Ok(report))) => Json(report).into_response(),
        Ok(Ok(Err(e))) => pipeline_error(e),
        Ok(Err(r)) => r,
        Err(_) => pipeline_error(PipelineError::BudgetExhausted(budget)),
    }
}

async fn revise(State(engine): State<Engine>, Json(req): Json<ReviseRequest>) -> Response {
    match blocking(move || engine.revise(&req.report)).await {
        Ok(Ok(outcome)) => Json(outcome).into_response(),
        Ok(Err(e)) => pipeline_error(e),
        Err(r) => r,
    }
}

async fn health(State(engine): State<Engine>) -> Response {
    Json(json!({
        "status": "ok",
        "engine_version": ENGINE_VERSION,
        "config_digest": engine.digest(),
    }))
    .into_response()
}

/// The service routes. `cors_origins` empty allows any origin.
pub fn router(engine: Engine, cors_origins: &[String]) -> Router {
    let origins: Vec<HeaderValue> = cors_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    let allow = if origins.is_empty() {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(origins)
    };
    let cors = CorsLayer::new()
        .allow_origin(allow)
        .allow_methods(Any)
        .allow_headers(Any);
    Router::new()
        .route("/api/ask", post(ask))
        .route("/api/verify", post(verify))
        .route("/api/revise", post(revise))
        .route("/api/health", get(health))
        .layer(cors)
        .with_state(engine)
}

pub async fn serve(engine: Engine, addr: &str, cors_origins: &[String]) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine, cors_origins)).await
}
