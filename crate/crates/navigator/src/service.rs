//! HTTP service. Every response body is canonical JSON.
//!
//! Reads run concurrently; workspace writes go through one async mutex.
//! Frontier and impossibility scans accept `?async=true`, which answers
//! `202` with a job id to poll at `GET /jobs/{id}` and cancel with
//! `DELETE /jobs/{id}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use navigator_core::tree::{default_tree, DecisionTree};
use navigator_core::{Error as CoreError, Scenario};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::api::{self, FrontierRequest, ImpossibilityRequest, MetricsRequest, SelectRequest, SimulateRequest, TraverseRequest};
use crate::canonical;
use crate::error::{AppError, Result};
use crate::files::{parse_json, parse_scenario};
use crate::workspace::{new_report_id, now_unix_ms, Workspace};

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    workspace: Workspace,
    tree: DecisionTree,
    writer: tokio::sync::Mutex<()>,
    jobs: Mutex<HashMap<String, Job>>,
}

struct Job {
    cancel: Arc<AtomicBool>,
    state: JobState,
}

#[derive(Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum JobState {
    Running,
    Done { result: Value },
    Failed { error: Value },
    Cancelled,
}

impl AppState {
    pub fn new(workspace: Workspace) -> Self {
        Self::with_tree(workspace, default_tree())
    }

    pub fn with_tree(workspace: Workspace, tree: DecisionTree) -> Self {
        AppState {
            inner: Arc::new(Inner {
                workspace,
                tree,
                writer: tokio::sync::Mutex::new(()),
                jobs: Mutex::new(HashMap::new()),
            }),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/scenarios/{id}/metrics", post(metrics))
        .route("/scenarios/{id}/frontier", post(frontier))
        .route("/scenarios/{id}/impossibility", post(impossibility))
        .route("/scenarios/{id}/simulate", post(simulate))
        .route("/scenarios/{id}/select", post(select))
        .route("/scenarios/{id}/reports", post(create_report))
        .route("/reports/{id}", get(get_report))
        .route("/tree", get(get_tree))
        .route("/tree/traverse", post(traverse))
        .route("/jobs/{id}", get(get_job).delete(cancel_job))
        .with_state(state)
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(addr: SocketAddr, workspace: Workspace) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::io(format!("binding {}", addr), e))?;
    axum::serve(listener, router(AppState::new(workspace)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::io("serving", e))
}

fn canonical_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match canonical::to_string(value) {
        Ok(body) => canonical_response(status, body),
        Err(e) => AppError::Request(e.to_string()).into_response(),
    }
}

pub fn error_status(e: &AppError) -> StatusCode {
    match e {
        AppError::NotFound(_) => StatusCode::NOT_FOUND,
        AppError::Conflict(_) | AppError::Core(CoreError::Cancelled) => StatusCode::CONFLICT,
        AppError::Parse { .. } | AppError::Request(_) | AppError::InvalidId(_) => StatusCode::BAD_REQUEST,
        AppError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
        AppError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_body(e: &AppError) -> Value {
    json!({"error": {"kind": e.kind(), "message": e.to_string()}})
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        canonical_response(error_status(&self), canonical::value_to_string(&error_body(&self)))
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &str) -> Result<T> {
    parse_json(if body.trim().is_empty() { "{}" } else { body })
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Request(format!("worker failed: {}", e)))?
}

fn load(state: &AppState, id: &str) -> Result<Scenario> {
    state.inner.workspace.get_scenario(id)
}

async fn create_scenario(State(state): State<AppState>, body: String) -> Result<Response> {
    let scenario = parse_scenario(&body)?;
    let _guard = state.inner.writer.lock().await;
    state.inner.workspace.put_scenario(&scenario)?;
    Ok(ok(StatusCode::CREATED, &json!({"id": scenario.id})))
}

async fn get_scenario(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    Ok(ok(StatusCode::OK, &load(&state, &id)?))
}

async fn metrics(State(state): State<AppState>, Path(id): Path<String>, body: String) -> Result<Response> {
    let req: MetricsRequest = parse_body(&body)?;
    let scenario = load(&state, &id)?;
    Ok(ok(StatusCode::OK, &blocking(move || api::metrics(&scenario, &req)).await?))
}

#[derive(Deserialize, Default)]
struct AsyncFlag {
    #[serde(default, rename = "async")]
    run_async: bool,
}

/// Runs `work` inline, or as a job when the caller asked for `?async=true`.
async fn maybe_job<T: Serialize + Send + 'static>(
    state: AppState,
    run_async: bool,
    work: impl FnOnce(&AtomicBool) -> Result<T> + Send + 'static,
) -> Result<Response> {
    let cancel = Arc::new(AtomicBool::new(false));
    if !run_async {
        let flag = cancel.clone();
        return Ok(ok(StatusCode::OK, &blocking(move || work(&flag)).await?));
    }
    let id = uuid::Uuid::new_v4().to_string();
    state.inner.jobs.lock().expect("job table").insert(
        id.clone(),
        Job { cancel: cancel.clone(), state: JobState::Running },
    );
    let job_id = id.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = work(&cancel).and_then(|v| serde_json::to_value(&v).map_err(|e| AppError::Request(e.to_string())));
        let next = match outcome {
            Ok(result) => JobState::Done { result },
            Err(AppError::Core(CoreError::Cancelled)) => JobState::Cancelled,
            Err(e) => JobState::Failed { error: error_body(&e)["error"].clone() },
        };
        if let Some(job) = state.inner.jobs.lock().expect("job table").get_mut(&job_id) {
            job.state = next;
        }
    });
    Ok(ok(StatusCode::ACCEPTED, &json!({"id": id, "status": "running"})))
}

async fn frontier(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(flag): Query<AsyncFlag>,
    body: String,
) -> Result<Response> {
    let req: FrontierRequest = parse_body(&body)?;
    let scenario = load(&state, &id)?;
    let run_async = flag.run_async;
    maybe_job(state, run_async, move |cancel| api::frontier(&scenario, &req, cancel)).await
}

async fn impossibility(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(flag): Query<AsyncFlag>,
    body: String,
) -> Result<Response> {
    let req: ImpossibilityRequest = parse_body(&body)?;
    let scenario = load(&state, &id)?;
    let run_async = flag.run_async;
    maybe_job(state, run_async, move |cancel| api::impossibility(&scenario, &req, cancel)).await
}

async fn simulate(State(state): State<AppState>, Path(id): Path<String>, body: String) -> Result<Response> {
    let req: SimulateRequest = parse_body(&body)?;
    let scenario = load(&state, &id)?;
    Ok(ok(StatusCode::OK, &blocking(move || api::simulate(Some(&scenario), &req)).await?))
}

async fn select(State(state): State<AppState>, Path(id): Path<String>, body: String) -> Result<Response> {
    let req: SelectRequest = parse_body(&body)?;
    let scenario = load(&state, &id)?;
    Ok(ok(StatusCode::OK, &blocking(move || api::select(&scenario, &req, &())).await?))
}

async fn create_report(State(state): State<AppState>, Path(id): Path<String>, body: String) -> Result<Response> {
    let req: SelectRequest = parse_body(&body)?;
    let scenario = load(&state, &id)?;
    let report = blocking(move || api::run_report(&scenario, &req, new_report_id(), now_unix_ms())).await?;
    let _guard = state.inner.writer.lock().await;
    state.inner.workspace.put_report(&report)?;
    Ok(ok(StatusCode::CREATED, &report))
}

async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    Ok(canonical_response(StatusCode::OK, state.inner.workspace.get_report(&id)?))
}

async fn get_tree(State(state): State<AppState>) -> Response {
    ok(StatusCode::OK, &state.inner.tree)
}

async fn traverse(State(state): State<AppState>, body: String) -> Result<Response> {
    let req: TraverseRequest = parse_body(&body)?;
    let scenario = req.scenario_id.as_deref().map(|id| load(&state, id)).transpose()?;
    let select = req.select.clone().unwrap_or_default();
    let report = blocking(move || {
        api::traverse(&state.inner.tree, &req.answers, scenario.as_ref().map(|s| (s, &select)))
    })
    .await?;
    Ok(ok(StatusCode::OK, &report))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let jobs = state.inner.jobs.lock().expect("job table");
    let job = jobs.get(&id).ok_or_else(|| AppError::NotFound(format!("job `{}`", id)))?;
    let mut body = serde_json::to_value(&job.state).map_err(|e| AppError::Request(e.to_string()))?;
    body["id"] = Value::String(id);
    Ok(ok(StatusCode::OK, &body))
}

async fn cancel_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let jobs = state.inner.jobs.lock().expect("job table");
    let job = jobs.get(&id).ok_or_else(|| AppError::NotFound(format!("job `{}`", id)))?;
    job.cancel.store(true, Ordering::Relaxed);
    Ok(ok(StatusCode::ACCEPTED, &json!({"id": id, "cancelRequested": true})))
}
