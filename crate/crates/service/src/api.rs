//! HTTP routes over the session store. Bodies and replies are JSON.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use spcdt::dtree::NodeId;

use crate::session::{CreateSession, LayoutEdit, SessionError, SessionStore};

pub struct ApiError(StatusCode, String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownSession(_) | SessionError::UnknownNode(_) | SessionError::UnknownDataset(_) => {
                StatusCode::NOT_FOUND
            }
            SessionError::NothingToUndo => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Store = State<Arc<SessionStore>>;

/// Body extractor whose failures use the JSON error shape.
pub struct Body<T>(T);

impl<S, T> axum::extract::FromRequest<S> for Body<T>
where
    Json<T>: axum::extract::FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<T>::from_request(req, state).await?;
        Ok(Body(v))
    }
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create(State(store): Store, Body(req): Body<CreateSession>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let s = store.create(req)?;
    Ok((StatusCode::CREATED, Json(Created { session_id: s.id.clone() })))
}

async fn scene(State(store): Store, Path(id): Path<String>) -> Result<Response, ApiError> {
    let scene = store.get(&id)?.scene();
    Ok(Json(&*scene).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdEdit {
    node_id: NodeId,
    value: f64,
}

async fn threshold(State(store): Store, Path(id): Path<String>, Body(edit): Body<ThresholdEdit>) -> Result<Response, ApiError> {
    let (scene, delta) = store.get(&id)?.adjust_threshold(edit.node_id, edit.value)?;
    Ok(Json(json!({ "scene": &*scene, "delta": delta })).into_response())
}

async fn layout(State(store): Store, Path(id): Path<String>, Body(edit): Body<LayoutEdit>) -> Result<Response, ApiError> {
    let scene = store.get(&id)?.edit_layout(edit)?;
    Ok(Json(&*scene).into_response())
}

async fn undo(State(store): Store, Path(id): Path<String>) -> Result<Response, ApiError> {
    let scene = store.get(&id)?.undo()?;
    Ok(Json(&*scene).into_response())
}

async fn evaluation(State(store): Store, Path(id): Path<String>) -> ApiResult<spcdt::EvaluationReport> {
    Ok(Json(store.get(&id)?.evaluation()))
}

#[derive(Deserialize)]
struct ReportQuery {
    epsilon: Option<f64>,
    train_fraction: Option<f64>,
    seed: Option<u64>,
}

async fn report(
    State(store): Store,
    Path((id, kind)): Path<(String, String)>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let s = store.get(&id)?;
    let body = match kind.as_str() {
        "overgen" => serde_json::to_value(s.overgeneralization()?),
        "margins" => serde_json::to_value(s.margins(q.epsilon)?),
        "split-compare" => serde_json::to_value(s.split_compare(q.train_fraction.unwrap_or(0.9), q.seed.unwrap_or(0))?),
        other => return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown report {other}"))),
    };
    let body = body.map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(body).into_response())
}

async fn workspace(State(store): Store, Path(id): Path<String>) -> ApiResult<crate::session::Workspace> {
    Ok(Json(store.get(&id)?.workspace()))
}

async fn delete(State(store): Store, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    store.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Builds the router. With `static_dir`, unmatched paths are served from it.
pub fn router(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", axum::routing::delete(delete))
        .route("/sessions/{id}/scene", get(scene))
        .route("/sessions/{id}/threshold", patch(threshold))
        .route("/sessions/{id}/layout", patch(layout))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/evaluation", get(evaluation))
        .route("/sessions/{id}/reports/{kind}", get(report))
        .route("/sessions/{id}/workspace", get(workspace))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError(StatusCode::NOT_FOUND, "no such route".into()) }),
    }
}
