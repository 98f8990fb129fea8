//! HTTP/JSON front end over [`capgen_core::pipeline::Pipeline`].
//!
//! Every operation is a `POST` under `/v1` taking and returning JSON.
//! Training runs in the background: `POST /v1/train` answers `202` with a
//! job id, and `GET /v1/jobs/{id}` reports per-epoch progress and the result.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use capgen_core::api::{
    ApiError, CaptionRequest, ErrorKind, EvaluateRequest, GenerateRequest, Health, JobAccepted, JobProgress, JobState,
    JobStatus, ParamsRequest, PrepRequest, ReportRequest, TrainRequest,
};
use capgen_core::pipeline::Pipeline;
use capgen_core::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

#[derive(Default)]
struct Jobs {
    next_id: u64,
    status: HashMap<u64, JobStatus>,
}

/// Shared state of one server.
#[derive(Clone, Default)]
pub struct AppState {
    pipeline: Arc<Pipeline>,
    jobs: Arc<Mutex<Jobs>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// A failed request: status code plus JSON error body.
#[derive(Debug)]
pub struct Failure(StatusCode, ApiError);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let body = ApiError::from(&e);
        let status = match &e {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            Error::Usage(_) | Error::Config(_) | Error::Vocabulary { .. } | Error::Dimension { .. } => {
                StatusCode::BAD_REQUEST
            }
            Error::Format { .. } | Error::Integrity(_) | Error::Numeric(_) | Error::Divergence { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
        };
        Failure(status, body)
    }
}

impl From<JsonRejection> for Failure {
    fn from(r: JsonRejection) -> Self {
        Failure(
            StatusCode::BAD_REQUEST,
            ApiError {
                kind: ErrorKind::Usage,
                error: r.body_text(),
            },
        )
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure(
        StatusCode::INTERNAL_SERVER_ERROR,
        ApiError {
            kind: ErrorKind::Internal,
            error: message.into(),
        },
    )
}

type Reply<T> = Result<Json<T>, Failure>;

/// Runs a pipeline call on the blocking pool.
async fn blocking<T, F>(state: &AppState, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&Pipeline) -> capgen_core::Result<T> + Send + 'static,
{
    let pipeline = Arc::clone(&state.pipeline);
    match tokio::task::spawn_blocking(move || f(&pipeline)).await {
        Ok(result) => Ok(Json(result?)),
        Err(e) => Err(internal(format!("worker failed: {e}"))),
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn params(
    State(state): State<AppState>,
    body: Result<Json<ParamsRequest>, JsonRejection>,
) -> Reply<capgen_core::api::ParamsResponse> {
    let Json(req) = body?;
    blocking(&state, move |p| p.params(&req)).await
}

async fn prep(
    State(state): State<AppState>,
    body: Result<Json<PrepRequest>, JsonRejection>,
) -> Reply<capgen_core::api::PrepResponse> {
    let Json(req) = body?;
    tracing::info!(dataset = %req.dataset, out = %req.out.display(), "prep");
    blocking(&state, move |p| p.prep(&req)).await
}

async fn generate(
    State(state): State<AppState>,
    body: Result<Json<GenerateRequest>, JsonRejection>,
) -> Reply<capgen_core::api::GenerateResponse> {
    let Json(req) = body?;
    tracing::info!(checkpoint = %req.checkpoint.display(), split = %req.split, "generate");
    blocking(&state, move |p| p.generate(&req)).await
}

async fn evaluate(
    State(state): State<AppState>,
    body: Result<Json<EvaluateRequest>, JsonRejection>,
) -> Reply<capgen_core::api::EvaluateResponse> {
    let Json(req) = body?;
    tracing::info!(hypotheses = %req.hypotheses.display(), "evaluate");
    blocking(&state, move |p| p.evaluate(&req)).await
}

async fn report(
    State(state): State<AppState>,
    body: Result<Json<ReportRequest>, JsonRejection>,
) -> Reply<capgen_core::api::ReportResponse> {
    let Json(req) = body?;
    blocking(&state, move |p| p.report(&req)).await
}

async fn caption(
    State(state): State<AppState>,
    body: Result<Json<CaptionRequest>, JsonRejection>,
) -> Reply<capgen_core::api::CaptionResponse> {
    let Json(req) = body?;
    blocking(&state, move |p| p.caption(&req)).await
}

fn update_job(jobs: &Mutex<Jobs>, id: u64, f: impl FnOnce(&mut JobStatus)) {
    if let Some(status) = jobs.lock().expect("job table poisoned").status.get_mut(&id) {
        f(status);
    }
}

async fn train(
    State(state): State<AppState>,
    body: Result<Json<TrainRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<JobAccepted>), Failure> {
    let Json(req) = body?;
    let job_id = {
        let mut jobs = state.jobs.lock().expect("job table poisoned");
        jobs.next_id += 1;
        let id = jobs.next_id;
        jobs.status.insert(
            id,
            JobStatus {
                job_id: id,
                state: JobState::Running,
                progress: Vec::new(),
                result: None,
                error: None,
            },
        );
        id
    };
    tracing::info!(job_id, arch = %req.architecture, out = %req.out.display(), "train job started");
    let pipeline = Arc::clone(&state.pipeline);
    let jobs = Arc::clone(&state.jobs);
    tokio::task::spawn_blocking(move || {
        let progress = |seed: u64, record: &capgen_core::training::EpochRecord| {
            update_job(&jobs, job_id, |s| {
                s.progress.push(JobProgress { seed, record: *record })
            });
        };
        let outcome = pipeline.train(&req, &progress);
        update_job(&jobs, job_id, |s| match outcome {
            Ok(result) => {
                s.state = JobState::Succeeded;
                s.result = Some(result);
            }
            Err(e) => {
                tracing::warn!(job_id, error = %e, "train job failed");
                s.state = JobState::Failed;
                s.error = Some(ApiError::from(&e));
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(JobAccepted { job_id })))
}

async fn job(State(state): State<AppState>, Path(id): Path<u64>) -> Reply<JobStatus> {
    let jobs = state.jobs.lock().expect("job table poisoned");
    match jobs.status.get(&id) {
        Some(status) => Ok(Json(status.clone())),
        None => Err(Failure(
            StatusCode::NOT_FOUND,
            ApiError {
                kind: ErrorKind::NotFound,
                error: format!("no job {id}"),
            },
        )),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/params", post(params))
        .route("/v1/prep", post(prep))
        .route("/v1/train", post(train))
        .route("/v1/jobs/{id}", get(job))
        .route("/v1/generate", post(generate))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/report", post(report))
        .route("/v1/caption", post(caption))
        .with_state(state)
}

/// Serves until the task is dropped or the listener fails.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves in a background task, returning the bound address.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(serve(listener, AppState::new()));
    Ok((local, handle))
}
