//! HTTP API of the clerical review service.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/health` | liveness |
//! | GET | `/api/tasks?offset=&limit=&status=` | paginated task list |
//! | GET | `/api/tasks/{id}` | one task with its current decision |
//! | POST | `/api/decisions` | commit a decision |
//! | GET | `/api/progress` | decided and pending counts |
//! | GET | `/api/export` | the estimate with reviewed decisions merged |
//!
//! Decisions are written to the log and synced before they are
//! acknowledged. Readers see immutable snapshots and never wait on a write.

use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use betalink::estimators::LinkageEstimate;
use betalink::review::{
    Applied, DecisionLog, Progress, ReviewDecision, ReviewError, ReviewState, ReviewTask, TaskStatus,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 500;

struct Writer {
    state: ReviewState,
    log: DecisionLog,
}

pub struct ReviewService {
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<ReviewState>>,
}

impl ReviewService {
    /// Build the task state and replay every decision already in `log_path`.
    pub fn open(estimate: LinkageEstimate, tasks: Vec<ReviewTask>, log_path: &Path) -> anyhow::Result<Self> {
        let mut state = ReviewState::new(estimate, tasks)?;
        let past = DecisionLog::read(log_path).with_context(|| format!("reading decision log {}", log_path.display()))?;
        state.replay(past)?;
        let log = DecisionLog::open(log_path).with_context(|| format!("opening decision log {}", log_path.display()))?;
        let snapshot = RwLock::new(Arc::new(state.clone()));
        Ok(Self { writer: Mutex::new(Writer { state, log }), snapshot })
    }

    pub fn snapshot(&self) -> Arc<ReviewState> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn progress(&self) -> Progress {
        self.snapshot().progress()
    }

    /// Validate, persist and apply one decision. Concurrent submissions are
    /// serialized; the first to commit wins.
    pub fn submit(&self, mut d: ReviewDecision) -> Result<Applied, SubmitError> {
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let outcome = w.state.check(&d)?;
        if outcome == Applied::Duplicate {
            return Ok(outcome);
        }
        d.timestamp_ms = Some(now_ms());
        w.log.append(&d).map_err(|e| SubmitError::Storage(e.to_string()))?;
        w.state.apply(d)?;
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(w.state.clone());
        Ok(outcome)
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug)]
pub enum SubmitError {
    Review(ReviewError),
    Storage(String),
}

impl From<ReviewError> for SubmitError {
    fn from(e: ReviewError) -> Self {
        SubmitError::Review(e)
    }
}

impl IntoResponse for SubmitError {
    fn into_response(self) -> Response {
        match self {
            SubmitError::Review(e) => {
                let status = match e {
                    ReviewError::NotFound { .. } => StatusCode::NOT_FOUND,
                    ReviewError::InvalidTarget { .. } => StatusCode::UNPROCESSABLE_ENTITY,
                    ReviewError::AlreadyDecided { .. } | ReviewError::Conflict { .. } => StatusCode::CONFLICT,
                };
                let mut body = serde_json::to_value(&e).unwrap_or_default();
                body["message"] = json!(e.to_string());
                (status, Json(body)).into_response()
            }
            SubmitError::Storage(msg) => {
                (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": "storage", "message": msg }))).into_response()
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskView {
    #[serde(flatten)]
    pub task: ReviewTask,
    pub decision: Option<ReviewDecision>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub tasks: Vec<TaskView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub outcome: Applied,
    pub decision: ReviewDecision,
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    offset: Option<usize>,
    limit: Option<usize>,
    status: Option<TaskStatus>,
}

fn view(state: &ReviewState, task: &ReviewTask) -> TaskView {
    TaskView { task: task.clone(), decision: state.decision(task.id).cloned() }
}

type Shared = State<Arc<ReviewService>>;

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_tasks(State(svc): Shared, Query(q): Query<PageQuery>) -> Json<TaskPage> {
    let state = svc.snapshot();
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let matching: Vec<&ReviewTask> = state.tasks().iter().filter(|t| q.status.is_none_or(|s| t.status == s)).collect();
    let tasks = matching.iter().skip(offset).take(limit).map(|t| view(&state, t)).collect();
    Json(TaskPage { total: matching.len(), offset, limit, tasks })
}

async fn get_task(State(svc): Shared, UrlPath(id): UrlPath<usize>) -> Response {
    let state = svc.snapshot();
    match state.task(id) {
        Some(t) => Json(view(&state, t)).into_response(),
        None => SubmitError::Review(ReviewError::NotFound { task: id }).into_response(),
    }
}

async fn post_decision(State(svc): Shared, Json(d): Json<ReviewDecision>) -> Response {
    let task = d.task;
    let result = tokio::task::spawn_blocking(move || svc.submit(d).map(|o| (o, svc.snapshot())))
        .await
        .unwrap_or_else(|e| Err(SubmitError::Storage(e.to_string())));
    match result {
        Ok((outcome, state)) => {
            let status = if outcome == Applied::Committed { StatusCode::CREATED } else { StatusCode::OK };
            let decision = state.decision(task).cloned().expect("committed decision is recorded");
            (status, Json(SubmitResponse { outcome, decision })).into_response()
        }
        Err(e) => e.into_response(),
    }
}

async fn progress(State(svc): Shared) -> Json<Progress> {
    Json(svc.progress())
}

async fn export(State(svc): Shared) -> Response {
    match svc.snapshot().merged() {
        Ok(est) => Json(est).into_response(),
        Err(e) => SubmitError::Storage(e.to_string()).into_response(),
    }
}

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/tasks", get(list_tasks))
        .route("/api/tasks/{id}", get(get_task))
        .route("/api/decisions", post(post_decision))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .with_state(service)
}
