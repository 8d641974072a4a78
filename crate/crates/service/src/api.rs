//! HTTP routes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geoscript_core::registry::{render_prompt_catalog, ToolSpec};
use geoscript_core::script::Outcome;
use serde::Serialize;
use serde_json::json;

use crate::app::{App, QueryError, QueryRequest, QueryResponse};
use crate::store::UploadError;

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

pub fn router(app: Arc<App>) -> Router {
    let cap = app.uploads.cap;
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/query", post(query))
        .route("/runs", get(list_runs))
        .route("/runs/{id}", get(show_run))
        .route("/runs/{id}/artifacts/{name}", get(artifact))
        .route("/tools", get(tools))
        .route("/uploads", post(upload).layer(DefaultBodyLimit::max(cap)))
        .with_state(app)
}

async fn query(State(app): State<Arc<App>>, body: Bytes) -> Response {
    let req: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    let result = tokio::task::spawn_blocking(move || app.run_query(&req)).await;
    let record = match result {
        Ok(Ok(r)) => r,
        Ok(Err(e @ QueryError::EmptyQuery)) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
        Ok(Err(e @ QueryError::UnknownAttachment(_))) => return error(StatusCode::BAD_REQUEST, e),
        Ok(Err(e)) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
    };
    let status = match record.outcome {
        Outcome::BackendError { .. } => StatusCode::BAD_GATEWAY,
        _ => StatusCode::OK,
    };
    (status, Json(QueryResponse::of(&record))).into_response()
}

async fn list_runs(State(app): State<Arc<App>>) -> Response {
    let list = tokio::task::spawn_blocking(move || app.runs.list()).await.unwrap_or_default();
    Json(list).into_response()
}

async fn show_run(State(app): State<Arc<App>>, Path(id): Path<String>) -> Response {
    match app.runs.read_bytes(&id) {
        Some(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no run {id}")),
    }
}

async fn artifact(State(app): State<Arc<App>>, Path((id, name)): Path<(String, String)>) -> Response {
    let Some(path) = app.runs.artifact_path(&id, &name) else {
        return error(StatusCode::NOT_FOUND, format!("no artifact {name} in run {id}"));
    };
    let kind = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => "application/json",
        Some("txt") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, kind)], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Serialize)]
struct ToolsResponse<'a> {
    catalog: String,
    tools: Vec<&'a ToolSpec>,
}

async fn tools(State(app): State<Arc<App>>) -> Response {
    Json(ToolsResponse {
        catalog: render_prompt_catalog(&app.registry),
        tools: app.registry.specs().collect(),
    })
    .into_response()
}

async fn upload(State(app): State<Arc<App>>, headers: HeaderMap, body: Bytes) -> Response {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(|v| v.split(';').next().unwrap_or("").trim().to_ascii_lowercase());
    if let Some(ct) = content_type {
        if ct != "image/png" && ct != "application/octet-stream" {
            return error(StatusCode::UNSUPPORTED_MEDIA_TYPE, format!("unsupported content type {ct}"));
        }
    }
    match tokio::task::spawn_blocking(move || app.uploads.save(&body)).await {
        Ok(Ok(r)) => (StatusCode::CREATED, Json(r)).into_response(),
        Ok(Err(e @ UploadError::TooLarge(_))) => error(StatusCode::PAYLOAD_TOO_LARGE, e),
        Ok(Err(e @ UploadError::UnsupportedFormat)) => error(StatusCode::UNSUPPORTED_MEDIA_TYPE, e),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

/// Binds and serves until ctrl-c.
pub async fn serve(app: Arc<App>) -> anyhow::Result<()> {
    let addr = format!("{}:{}", app.config.bind, app.config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
