//! HTTP+JSON protocol over a [`SessionStore`].
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | [`CreateRequest`] |
//! | GET | `/sessions/{id}/next` | |
//! | POST | `/sessions/{id}/judgments` | [`SubmitRequest`] |
//! | GET | `/sessions/{id}/status` | |
//! | POST | `/sessions/{id}/review` | [`ReviewDecision`] |
//! | GET | `/export?partial=true` | |
//!
//! Failures answer `{code, message, detail}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use prefscope_core::SaatyGrade;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::session::{PairView, Progress, ProtocolError, ReviewDecision};
use crate::store::{CreateRequest, Export, SessionStore, StoreError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub pair: usize,
    pub grade: SaatyGrade,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub partial: bool,
}

/// Response of `GET /sessions/{id}/next`; `pair` is `None` once nothing is
/// left to judge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextResponse {
    pub pair: Option<PairView>,
    pub state: crate::session::SessionState,
}

pub struct ApiError(StatusCode, ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::AlreadyExists(_) => StatusCode::CONFLICT,
            StoreError::Protocol(ProtocolError::InvalidStudy(_) | ProtocolError::InvalidSessionId(_))
            | StoreError::NoStudy => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Protocol(ProtocolError::UnknownPair(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Protocol(_) | StoreError::Incomplete(_) | StoreError::MixedStudies => StatusCode::CONFLICT,
            StoreError::Io { .. } | StoreError::BadLog { .. } | StoreError::Replay { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let detail = match &e {
            StoreError::Incomplete(ids) => serde_json::json!({ "sessions": ids }),
            StoreError::Protocol(ProtocolError::WrongState { state, action }) => {
                serde_json::json!({ "state": state, "action": action })
            }
            StoreError::Protocol(ProtocolError::OutOfOrder { pair, expected }) => {
                serde_json::json!({ "pair": pair, "expected": expected })
            }
            StoreError::Protocol(ProtocolError::Duplicate(p) | ProtocolError::UnknownPair(p)) => {
                serde_json::json!({ "pair": p })
            }
            _ => Value::Null,
        };
        ApiError(
            status,
            ErrorBody {
                code: e.code().to_string(),
                message: e.to_string(),
                detail,
            },
        )
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(
            StatusCode::BAD_REQUEST,
            ErrorBody {
                code: "invalid_request".into(),
                message: "request body is not valid for this endpoint".into(),
                detail: Value::String(e.body_text()),
            },
        )
    }
}

type Shared = Arc<SessionStore>;
type ApiResult<T> = Result<Json<T>, ApiError>;

async fn create(
    State(store): State<Shared>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Progress>), ApiError> {
    let Json(req) = body?;
    Ok((StatusCode::CREATED, Json(store.create(req)?)))
}

async fn next(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<NextResponse> {
    let snap = store.snapshot(&id)?;
    Ok(Json(NextResponse {
        pair: snap.next_view(),
        state: snap.state,
    }))
}

async fn submit(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<SubmitRequest>, JsonRejection>,
) -> ApiResult<Progress> {
    let Json(req) = body?;
    Ok(Json(store.submit(&id, req.pair, req.grade)?))
}

async fn status(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<Progress> {
    Ok(Json(store.status(&id)?))
}

async fn review(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ReviewDecision>, JsonRejection>,
) -> ApiResult<Progress> {
    let Json(d) = body?;
    Ok(Json(store.review(&id, d)?))
}

async fn export(State(store): State<Shared>, Query(q): Query<ExportQuery>) -> ApiResult<Export> {
    Ok(Json(store.export(q.partial)?))
}

async fn not_found() -> ApiError {
    ApiError(
        StatusCode::NOT_FOUND,
        ErrorBody {
            code: "not_found".into(),
            message: "no such endpoint".into(),
            detail: Value::Null,
        },
    )
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/judgments", post(submit))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/review", post(review))
        .route("/export", get(export))
        .fallback(not_found)
        .with_state(store)
}
