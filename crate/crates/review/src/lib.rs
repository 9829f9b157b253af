//! HTTP front end for human-review campaigns.
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | `GET` | `/health` | | 200 |
//! | `GET` | `/datasets` | | 200, loaded dataset ids |
//! | `POST` | `/sessions` | [`NewSession`] | 201, [`SessionCreated`] |
//! | `GET` | `/sessions/{id}/next` | | 200, [`NextItem`] |
//! | `POST` | `/sessions/{id}/answers` | [`AnswerRequest`] | 201, [`Ack`] |
//! | `GET` | `/campaigns/{id}/report` | | 200, [`BaselineReport`] |
//!
//! Errors come back as `{"error": {"kind": ..., "message": ...}}` with 404 for
//! unknown sessions, items or campaigns, 409 for a repeated answer and 422 for
//! requests that fail a precondition.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forge_core::review::{Ack, ItemView, NewSession, ReviewSession, ReviewStore};
use forge_core::{BaselineReport, Error, Exact};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use forge_core::review;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub reviewer_id: String,
    pub dataset_id: String,
    pub campaign_id: String,
    pub show_video: bool,
    pub total: usize,
}

impl From<&ReviewSession> for SessionCreated {
    fn from(s: &ReviewSession) -> Self {
        Self {
            session_id: s.session_id.clone(),
            reviewer_id: s.reviewer_id.clone(),
            dataset_id: s.dataset_id.clone(),
            campaign_id: s.campaign_id.clone(),
            show_video: s.show_video,
            total: s.items.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextItem {
    pub complete: bool,
    pub answered: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub sample_id: String,
    pub chosen_index: usize,
}

pub struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Precondition(_) | Error::Config(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = json!({"error": {"kind": self.0.kind(), "message": self.0.to_string()}});
        (status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Store calls fsync; keep them off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> forge_core::Result<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Integrity(format!("worker panicked: {e}"))))?
        .map_err(ApiError)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn datasets(State(store): State<Arc<ReviewStore>>) -> Json<Vec<String>> {
    Json(store.dataset_ids().map(str::to_string).collect())
}

async fn create_session(
    State(store): State<Arc<ReviewStore>>,
    Json(req): Json<NewSession>,
) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let session = blocking(move || store.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(SessionCreated::from(&session))))
}

async fn next_item(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
) -> ApiResult<Json<NextItem>> {
    let session = store.session(&id)?;
    let item = store.next_item(&id)?;
    Ok(Json(NextItem {
        complete: item.is_none(),
        answered: session.answers.len(),
        total: session.items.len(),
        item,
    }))
}

async fn submit_answer(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
    Json(req): Json<AnswerRequest>,
) -> ApiResult<(StatusCode, Json<Ack>)> {
    let ack = blocking(move || store.submit_answer(&id, &req.sample_id, req.chosen_index)).await?;
    Ok((StatusCode::CREATED, Json(ack)))
}

async fn report(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
) -> ApiResult<Json<BaselineReport>> {
    Ok(Json(store.report::<Exact>(&id)?.to_f64()))
}

pub fn router(store: Arc<ReviewStore>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/datasets", get(datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/campaigns/{id}/report", get(report))
        .with_state(store)
}

/// Serve until the process is stopped.
pub async fn serve(store: Arc<ReviewStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "review service listening");
    axum::serve(listener, router(store)).await
}
