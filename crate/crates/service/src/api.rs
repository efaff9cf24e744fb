//! Routes and handlers.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use planspace_core::{
    NamedCommitment, NavSession, PlanSpace, PlanningTask, Query, ReasoningError, SessionError, SessionOptions, Snapshot,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use uuid::Uuid;

use crate::store::{SessionSlot, SessionStore, StoreError};

pub type AppState = Arc<SessionStore>;

/// An error response `{"error": message}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} `{id}`"))
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::unprocessable(r.body_text())
    }
}

impl From<ReasoningError> for ApiError {
    fn from(e: ReasoningError) -> Self {
        let status = match &e {
            _ if e.is_budget() => StatusCode::SERVICE_UNAVAILABLE,
            ReasoningError::Query(_) | ReasoningError::Encode(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReasoningError::Inconsistent(_) | ReasoningError::NoPlans | ReasoningError::NoFacets => {
                StatusCode::CONFLICT
            }
            ReasoningError::Compile(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownTask(id) => Self::not_found("task", &id),
            StoreError::BadBound(m) => Self::unprocessable(m),
            StoreError::Reasoning(r) => r.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Reasoning(r) => r.into(),
            other => Self::new(StatusCode::CONFLICT, other.to_string()),
        }
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type SnapshotResult = Result<Json<Snapshot>, ApiError>;

pub fn router(store: AppState) -> Router {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = match store
        .config
        .allowed_origin
        .as_deref()
        .and_then(|o| o.parse::<HeaderValue>().ok())
    {
        Some(origin) => cors.allow_origin(origin),
        None => cors.allow_origin(Any),
    };
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/tasks", post(create_task))
        .route("/tasks/{id}/spaces", post(create_space))
        .route("/spaces/{id}", get(get_space))
        .route("/spaces/{id}/prob", post(probability))
        .route("/spaces/{id}/sample", post(sample))
        .route("/spaces/{id}/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/undo", post(undo))
        .layer(cors)
        .with_state(store)
}

fn space(store: &SessionStore, id: &str) -> Result<Arc<PlanSpace>, ApiError> {
    store.space(id).ok_or_else(|| ApiError::not_found("plan space", id))
}

fn session(store: &SessionStore, id: &str) -> Result<Arc<Mutex<SessionSlot>>, ApiError> {
    Uuid::parse_str(id)
        .ok()
        .and_then(|u| store.session(u))
        .ok_or_else(|| ApiError::not_found("session", id))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("worker panicked")
}

fn names(ps: &PlanSpace, ops: impl IntoIterator<Item = usize>) -> Vec<String> {
    ops.into_iter().map(|o| ps.task().op_name(o).to_string()).collect()
}

async fn create_task(State(store): State<AppState>, body: String) -> ApiResult {
    let task = PlanningTask::from_json(&body).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let task_id = store.add_task(task);
    Ok(Json(json!({ "task_id": task_id })))
}

#[derive(Deserialize)]
struct SpaceRequest {
    length: usize,
}

async fn create_space(
    State(store): State<AppState>,
    Path(task_id): Path<String>,
    body: Result<Json<SpaceRequest>, JsonRejection>,
) -> ApiResult {
    if store.task(&task_id).is_none() {
        return Err(ApiError::not_found("task", &task_id));
    }
    let Json(req) = body?;
    let (space_id, ps) = store.get_or_build_space(&task_id, req.length).await?;
    Ok(Json(json!({
        "space_id": space_id,
        "length": req.length,
        "count": ps.count().to_string(),
    })))
}

async fn get_space(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let ps = space(&store, &id)?;
    blocking(move || {
        let root = ps.root();
        let sets = root.operator_sets()?;
        let facets = sets.facets();
        Ok(Json(json!({
            "space_id": id,
            "length": ps.bound().get(),
            "count": ps.count().to_string(),
            "brave": names(&ps, sets.brave.iter().copied()),
            "cautious": names(&ps, sets.cautious.iter().copied()),
            "facets": names(&ps, facets.iter().copied()),
            "facet_count": 2 * facets.len(),
        })))
    })
    .await
}

#[derive(Deserialize)]
struct ProbRequest {
    query: String,
}

async fn probability(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ProbRequest>, JsonRejection>,
) -> ApiResult {
    let ps = space(&store, &id)?;
    let Json(req) = body?;
    let query = Query::parse(&req.query, ps.task()).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    blocking(move || {
        let p = ps.root().probability(&query)?;
        Ok(Json(serde_json::to_value(&p).expect("serializable")))
    })
    .await
}

#[derive(Deserialize)]
struct SampleRequest {
    n: usize,
    #[serde(default)]
    seed: u64,
}

async fn sample(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SampleRequest>, JsonRejection>,
) -> ApiResult {
    let ps = space(&store, &id)?;
    let Json(req) = body?;
    if req.n > store.config.max_samples {
        return Err(ApiError::unprocessable(format!(
            "at most {} samples per request",
            store.config.max_samples
        )));
    }
    blocking(move || {
        let plans = ps.root().sample_plans(req.n, req.seed)?;
        let plans: Vec<Vec<String>> = plans.iter().map(|p| ps.task().plan_names(p)).collect();
        Ok(Json(json!({ "plans": plans })))
    })
    .await
}

#[derive(Deserialize, Default)]
struct SessionRequest {
    sample_k: Option<usize>,
    seed: Option<u64>,
}

async fn open_session(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<SessionRequest>>,
) -> Result<Json<OpenedSession>, ApiError> {
    let ps = space(&store, &id)?;
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let options = SessionOptions {
        sample_k: req.sample_k.unwrap_or(store.config.sample_k),
        seed: req.seed.unwrap_or(0),
    };
    let session = blocking(move || NavSession::open(ps, options)).await?;
    let snapshot = session.snapshot().clone();
    let session_id = store.insert_session(session);
    Ok(Json(OpenedSession { session_id, snapshot }))
}

#[derive(Serialize)]
struct OpenedSession {
    session_id: Uuid,
    snapshot: Snapshot,
}

/// Snapshots are serialized from the core type directly so that the bytes
/// match what the reasoning module produces.
fn touch(slot: &mut SessionSlot) -> Json<Snapshot> {
    slot.last_access = Instant::now();
    Json(slot.session.snapshot().clone())
}

async fn get_session(State(store): State<AppState>, Path(id): Path<String>) -> SnapshotResult {
    let slot = session(&store, &id)?;
    let mut slot = slot.lock().expect("session lock");
    Ok(touch(&mut slot))
}

#[derive(Deserialize)]
struct CommitRequest {
    commitment: NamedCommitment,
}

async fn commit(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<CommitRequest>, JsonRejection>,
) -> SnapshotResult {
    let slot = session(&store, &id)?;
    let Json(req) = body?;
    blocking(move || {
        let mut slot = slot.lock().expect("session lock");
        let task = slot.session.space().task_arc().clone();
        if task.op_id(&req.commitment.op).is_none() {
            return Err(ApiError::unprocessable(format!(
                "unknown operator `{}`",
                req.commitment.op
            )));
        }
        let c = req.commitment.resolve(&task)?;
        slot.session.commit(c)?;
        Ok(touch(&mut slot))
    })
    .await
}

async fn undo(State(store): State<AppState>, Path(id): Path<String>) -> SnapshotResult {
    let slot = session(&store, &id)?;
    let mut slot = slot.lock().expect("session lock");
    slot.session.undo()?;
    Ok(touch(&mut slot))
}
