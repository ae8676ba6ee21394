//! Loopback HTTP API over a [`SessionStore`].
//!
//! There is no authentication; the service is meant to be bound to
//! 127.0.0.1 on the machine running the session.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use goalsight_core::scheduler::Block;
use goalsight_core::session::{CreateSession, NextTrial, SessionError, SessionStore};
use goalsight_core::{Classification, SensitivityReport, TrialResponse, TrialTelemetry, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::SessionSummary;

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(SessionError::Protocol(e.body_text()))
    }
}

pub fn status_for(e: &SessionError) -> StatusCode {
    match e.code() {
        "not_found" => StatusCode::NOT_FOUND,
        "structural" | "privacy" => StatusCode::UNPROCESSABLE_ENTITY,
        "sequencing" | "lifecycle" => StatusCode::CONFLICT,
        "protocol" => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.0.code(), "message": self.0.to_string() } });
        (status_for(&self.0), Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Store = State<Arc<SessionStore>>;

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/responses", post(respond))
        .route("/sessions/{id}/telemetry", post(telemetry))
        .route("/sessions/{id}/recall", post(recall))
        .route("/sessions/{id}/abort", post(abort))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/report", get(report))
        .with_state(store)
}

async fn create(
    State(store): Store,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionSummary>), ApiError> {
    let Json(req) = body?;
    let state = store.create(&req)?;
    Ok((StatusCode::CREATED, Json(SessionSummary::from(&state))))
}

async fn list(State(store): Store) -> ApiResult<Vec<SessionSummary>> {
    Ok(Json(store.list()?.iter().map(SessionSummary::from).collect()))
}

async fn show(State(store): Store, Path(id): Path<String>) -> ApiResult<SessionSummary> {
    Ok(Json(SessionSummary::from(&store.state(&id)?)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct StartRequest {
    pub refresh_hz: Option<f64>,
    /// Must be true: the participant has agreed to take part.
    pub consent_confirmed: bool,
}

async fn start(
    State(store): Store,
    Path(id): Path<String>,
    body: Result<Json<StartRequest>, JsonRejection>,
) -> ApiResult<SessionSummary> {
    let Json(req) = body?;
    if !req.consent_confirmed {
        return Err(SessionError::Sequencing("consent must be confirmed before starting".into()).into());
    }
    Ok(Json(SessionSummary::from(&store.start(&id, req.refresh_hz)?)))
}

async fn next(State(store): Store, Path(id): Path<String>) -> ApiResult<NextTrial> {
    Ok(Json(store.next_trial(&id)?))
}

async fn respond(
    State(store): Store,
    Path(id): Path<String>,
    body: Result<Json<TrialResponse>, JsonRejection>,
) -> ApiResult<Classification> {
    let Json(r) = body?;
    Ok(Json(store.record_response(&id, &r)?))
}

#[derive(Debug, Deserialize)]
pub struct TelemetryRequest {
    #[serde(default)]
    pub block: Option<Block>,
    #[serde(flatten)]
    pub telemetry: TrialTelemetry,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TelemetryReply {
    pub verdict: Verdict,
}

async fn telemetry(
    State(store): Store,
    Path(id): Path<String>,
    body: Result<Json<TelemetryRequest>, JsonRejection>,
) -> ApiResult<TelemetryReply> {
    let Json(req) = body?;
    let verdict = store.record_telemetry(&id, req.block, &req.telemetry)?;
    Ok(Json(TelemetryReply { verdict }))
}

#[derive(Debug, Deserialize)]
pub struct RecallRequest {
    pub words: Vec<String>,
}

async fn recall(
    State(store): Store,
    Path(id): Path<String>,
    body: Result<Json<RecallRequest>, JsonRejection>,
) -> ApiResult<SessionSummary> {
    let Json(req) = body?;
    Ok(Json(SessionSummary::from(&store.submit_recall(&id, &req.words)?)))
}

async fn abort(State(store): Store, Path(id): Path<String>) -> ApiResult<SessionSummary> {
    Ok(Json(SessionSummary::from(&store.abort(&id)?)))
}

async fn finalize(State(store): Store, Path(id): Path<String>) -> ApiResult<SensitivityReport> {
    Ok(Json(store.finalize(&id)?))
}

async fn report(State(store): Store, Path(id): Path<String>) -> ApiResult<SensitivityReport> {
    Ok(Json(store.report(&id)?))
}
