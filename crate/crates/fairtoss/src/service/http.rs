use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, HeaderName, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::cors::{Any, CorsLayer};

use super::{ApiError, ApiResult, ErrorKind, SessionManager, TossRequest, WhatIfQuery};
use crate::error::{Error, Result};

/// Request header carrying a captain's capability token.
pub const TOKEN_HEADER: &str = "x-fairtoss-token";

type AppState = Arc<SessionManager>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        (status, Json(self)).into_response()
    }
}

fn ok<T: Serialize>(status: StatusCode, result: ApiResult<T>) -> Response {
    match result {
        Ok(body) => (status, Json(body)).into_response(),
        Err(e) => e.into_response(),
    }
}

fn token(headers: &HeaderMap) -> Option<&str> {
    headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok())
}

/// Parse a JSON body; an empty body reads as `{}` when `T` allows it.
fn body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let text = std::str::from_utf8(bytes).map_err(|_| ApiError::validation("", "body is not UTF-8"))?;
    let text = if text.trim().is_empty() { "{}" } else { text };
    crate::io::from_json_with_path(text).map_err(|e| match e {
        fairtoss_core::Error::Config { path, message } => ApiError::validation(&path, message),
        other => other.into(),
    })
}

async fn create(State(m): State<AppState>, bytes: Bytes) -> Response {
    let result = body(&bytes).and_then(|req| m.create(req));
    ok(StatusCode::CREATED, result)
}

async fn toss(State(m): State<AppState>, Path(id): Path<String>, headers: HeaderMap, bytes: Bytes) -> Response {
    let result = body::<TossRequest>(&bytes).and_then(|req| m.toss(&id, token(&headers), req));
    ok(StatusCode::OK, result)
}

async fn proposal(State(m): State<AppState>, Path(id): Path<String>, headers: HeaderMap, bytes: Bytes) -> Response {
    let result = body(&bytes).and_then(|req| m.propose(&id, token(&headers), req));
    ok(StatusCode::OK, result)
}

async fn choice(State(m): State<AppState>, Path(id): Path<String>, headers: HeaderMap, bytes: Bytes) -> Response {
    let result = body(&bytes).and_then(|req| m.choose(&id, token(&headers), req));
    ok(StatusCode::OK, result)
}

async fn session(State(m): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    ok(StatusCode::OK, m.get(&id, token(&headers)))
}

async fn whatif(
    State(m): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    query: Result<Query<WhatIfQuery>, QueryRejection>,
) -> Response {
    let result = query
        .map_err(|e| ApiError::new(ErrorKind::Validation, "validation_failed", e.body_text()))
        .and_then(|Query(q)| m.whatif(&id, token(&headers), &q));
    ok(StatusCode::OK, result)
}

async fn not_found() -> Response {
    ApiError::new(ErrorKind::NotFound, "not_found", "no such endpoint").into_response()
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([
            axum::http::header::CONTENT_TYPE,
            HeaderName::from_static(TOKEN_HEADER),
        ]);
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/toss", post(toss))
        .route("/sessions/{id}/proposal", post(proposal))
        .route("/sessions/{id}/choice", post(choice))
        .route("/sessions/{id}/whatif", get(whatif))
        .fallback(not_found)
        .layer(cors)
        .with_state(manager)
}

/// Serve until Ctrl-C.
pub async fn serve(addr: SocketAddr, manager: Arc<SessionManager>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    let local = listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?;
    log::info!("listening on http://{local}");
    eprintln!("fairtoss session service listening on http://{local}");
    axum::serve(listener, router(manager))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(local.to_string(), e))
}
