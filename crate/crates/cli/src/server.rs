//! HTTP JSON API over a [`ReviewSession`].
//!
//! Reads take a shared lock; submissions and exports take the write lock, so
//! the journal has a single writer and every acknowledgment follows a flush.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hcoal_core::review::{ExportSummary, Progress, QueueItem};
use hcoal_core::{ReviewError, ReviewSession};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

#[derive(Clone)]
pub struct AppState {
    session: Arc<RwLock<ReviewSession>>,
    export_path: Arc<PathBuf>,
}

impl AppState {
    pub fn new(session: ReviewSession, export_path: PathBuf) -> Self {
        Self {
            session: Arc::new(RwLock::new(session)),
            export_path: Arc::new(export_path),
        }
    }

    pub fn session(&self) -> &Arc<RwLock<ReviewSession>> {
        &self.session
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    token: Option<usize>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
            token: None,
        }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let message = e.to_string();
        let (status, code, token) = match e {
            ReviewError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", None),
            ReviewError::Validation { token, .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "validation", token)
            }
            ReviewError::Io { .. } | ReviewError::Journal { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "io", None)
            }
            ReviewError::Rank(_) | ReviewError::Corpus(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", None)
            }
        };
        Self {
            status,
            code,
            message,
            token,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(t) = self.token {
            error["token"] = json!(t);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

fn poisoned() -> ApiError {
    ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: "session lock poisoned".into(),
        token: None,
    }
}

#[derive(Debug, Deserialize)]
pub struct LabelsBody {
    pub tags: Vec<String>,
    #[serde(default)]
    pub annotator: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Revision {
    pub revision: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Schema {
    pub entity_types: Vec<String>,
}

fn parse_id(raw: &str) -> Result<usize, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not an example id")))
}

async fn queue(State(st): State<AppState>) -> Result<Json<Vec<QueueItem>>, ApiError> {
    let s = st.session.read().map_err(|_| poisoned())?;
    Ok(Json(s.queue()))
}

async fn example(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let s = st.session.read().map_err(|_| poisoned())?;
    Ok(Json(s.example(id)?).into_response())
}

async fn submit(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Revision>, ApiError> {
    let id = parse_id(&id)?;
    let body: LabelsBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?;
    let mut s = st.session.write().map_err(|_| poisoned())?;
    let revision = s.submit(id, &body.tags, &body.annotator, chrono::Utc::now())?;
    Ok(Json(Revision { revision }))
}

async fn progress(State(st): State<AppState>) -> Result<Json<Progress>, ApiError> {
    let s = st.session.read().map_err(|_| poisoned())?;
    Ok(Json(s.progress()))
}

async fn export(State(st): State<AppState>) -> Result<Json<ExportSummary>, ApiError> {
    let s = st.session.write().map_err(|_| poisoned())?;
    Ok(Json(s.export_to(&st.export_path)?))
}

async fn schema(State(st): State<AppState>) -> Result<Json<Schema>, ApiError> {
    let s = st.session.read().map_err(|_| poisoned())?;
    Ok(Json(Schema {
        entity_types: s.entity_types(),
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/queue", get(queue))
        .route("/api/examples/{id}", get(example))
        .route("/api/examples/{id}/labels", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/export", post(export))
        .route("/api/schema", get(schema))
        .layer(CorsLayer::permissive())
        .with_state(state)
}
