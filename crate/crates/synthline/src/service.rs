//! JSON-over-HTTP API backing the configurator.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /api/model` | the feature model as a JSON tree |
//! | `POST /api/validate` | validation report for a (possibly partial) configuration |
//! | `POST /api/expand?subsetSize=N` | atomic count, first ten atomics, allocation preview |
//! | `POST /api/runs` | start a generation run, returns `{"runId"}` |
//! | `GET /api/runs`, `GET /api/runs/{id}` | run snapshots |
//! | `POST /api/runs/{id}/cancel` | request cancellation |
//! | `GET /api/runs/{id}/data?format=csv\|json` | the produced dataset |
//! | `POST /api/metrics` | diversity report for a run or an uploaded dataset |
//!
//! Errors are `{"code", "message"}` objects, plus `report` for 422 responses.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use synthline_core::config::validate;
use synthline_core::expand::{axes, count_atomic_configurations};
use synthline_core::metrics::{diversity_report, DiversityReport, HashEmbedder, ReportOptions};
use synthline_core::{
    allocate_samples, AtomicConfiguration, Axis, Configuration, Dataset, ExpandError,
    FeatureModel, LabelSpec, SyntheticSample, ValidationReport,
};
use tower_http::services::ServeDir;

use crate::embed::HttpEmbedder;
use crate::engine::{
    subset_size, Backoff, CompletionBackend, EngineError, Generation, GenerationParams, MockBackend, RunHandle,
    RunOptions,
};
use crate::store::{self, file_sink, Format};

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), report: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn invalid(report: ValidationReport) -> Self {
        ApiError {
            report: Some(report),
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_configuration", "the configuration is invalid")
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<ExpandError> for ApiError {
    fn from(e: ExpandError) -> Self {
        match e {
            ExpandError::Invalid(report) => ApiError::invalid(report),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "expansion", other.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Expand(e) => e.into(),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct ServiceConfig {
    pub model: FeatureModel,
    /// Where run outputs are written, one file per run.
    pub data_dir: PathBuf,
    /// Built UI assets; a placeholder page is served when unset.
    pub ui_dir: Option<PathBuf>,
    /// Used for runs that ask for the `default` backend.
    pub default_backend: Option<Arc<dyn CompletionBackend>>,
    pub mock_latency: Duration,
    pub backoff: Backoff,
}

impl ServiceConfig {
    pub fn new(model: FeatureModel, data_dir: PathBuf) -> Self {
        ServiceConfig {
            model,
            data_dir,
            ui_dir: None,
            default_backend: None,
            mock_latency: Duration::ZERO,
            backoff: Backoff::default(),
        }
    }
}

struct RunEntry {
    handle: RunHandle,
    path: PathBuf,
    format: Format,
}

struct AppState {
    config: ServiceConfig,
    runs: RwLock<HashMap<String, RunEntry>>,
}

type Shared = Arc<AppState>;

pub fn router(config: ServiceConfig) -> Router {
    let ui_dir = config.ui_dir.clone();
    let state = Arc::new(AppState { config, runs: RwLock::new(HashMap::new()) });
    let api = Router::new()
        .route("/api/model", get(get_model))
        .route("/api/validate", post(post_validate))
        .route("/api/expand", post(post_expand))
        .route("/api/runs", post(post_run).get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/cancel", post(cancel_run))
        .route("/api/runs/{id}/data", get(get_run_data))
        .route("/api/metrics", post(post_metrics))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX) })),
    }
}

const INDEX: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Synthline</title></head>\n<body><h1>Synthline</h1><p>The configurator API is served under <code>/api</code>. Start with <a href=\"/api/model\">/api/model</a>.</p></body></html>\n";

async fn get_model(State(s): State<Shared>) -> Json<FeatureModel> {
    Json(s.config.model.clone())
}

async fn post_validate(
    State(s): State<Shared>,
    body: Result<Json<Configuration>, JsonRejection>,
) -> ApiResult<Json<ValidationReport>> {
    let Json(config) = body?;
    Ok(Json(validate(&s.config.model, &config)))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpandQuery {
    pub subset_size: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AllocationPreview {
    pub subset_size: usize,
    pub min_per_configuration: usize,
    pub max_per_configuration: usize,
    /// Counts for the atomics listed in `sample`.
    pub counts: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpandResponse {
    pub count: usize,
    pub axes: Vec<Axis>,
    pub sample: Vec<AtomicConfiguration>,
    pub allocation: Option<AllocationPreview>,
}

const PREVIEW: usize = 10;

async fn post_expand(
    State(s): State<Shared>,
    Query(q): Query<ExpandQuery>,
    body: Result<Json<Configuration>, JsonRejection>,
) -> ApiResult<Json<ExpandResponse>> {
    let Json(config) = body?;
    let model = &s.config.model;
    let count = count_atomic_configurations(model, &config)?;
    let axes = axes(model, &config);
    let sample = (0..count.min(PREVIEW))
        .map(|i| synthline_core::expand::atomic_at(&axes, i))
        .collect::<Result<Vec<_>, _>>()?;
    let n = q.subset_size.or_else(|| subset_size(&config).ok());
    let allocation = match n {
        Some(0) => return Err(ApiError::bad_request("subsetSize must be positive")),
        Some(n) => {
            let counts = allocate_samples(count, n).map_err(|e| ApiError::bad_request(e.to_string()))?;
            Some(AllocationPreview {
                subset_size: n,
                min_per_configuration: counts.iter().copied().min().unwrap_or(0),
                max_per_configuration: counts.iter().copied().max().unwrap_or(0),
                counts: counts.into_iter().take(PREVIEW).collect(),
            })
        }
        None => None,
    };
    Ok(Json(ExpandResponse { count, axes, sample, allocation }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Mock,
    Default,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunRequest {
    pub configuration: Configuration,
    pub label: LabelSpec,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub max_concurrency: Option<usize>,
    #[serde(default)]
    pub retry_limit: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunCreated {
    pub run_id: String,
}

async fn post_run(
    State(s): State<Shared>,
    body: Result<Json<RunRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<RunCreated>)> {
    let Json(req) = body?;
    let model = &s.config.model;
    let report = validate(model, &req.configuration);
    if !report.valid {
        return Err(ApiError::invalid(report));
    }
    let backend: Arc<dyn CompletionBackend> = match req.backend {
        BackendChoice::Mock => Arc::new(MockBackend::new().with_latency(s.config.mock_latency)),
        BackendChoice::Default => s
            .config
            .default_backend
            .clone()
            .ok_or_else(|| ApiError::bad_request("no default backend is configured; start the service with --backend"))?,
    };
    let mut params = GenerationParams::from_configuration(model, &req.configuration);
    if let Some(n) = req.max_concurrency {
        params.max_concurrency = n;
    }
    if let Some(n) = req.retry_limit {
        params.retry_limit = n;
    }
    let options = RunOptions { seed: req.seed, backoff: s.config.backoff, template: None };
    let generation = Generation::prepare(model, &req.configuration, &req.label, params, options)?;
    let handle = generation.handle();
    let run_id = handle.id();

    std::fs::create_dir_all(&s.config.data_dir).map_err(|e| ApiError::internal(e.to_string()))?;
    let path = s.config.data_dir.join(format!("{run_id}.{}", req.format.extension()));
    let mut sink = file_sink(&path, req.format).map_err(|e| ApiError::internal(e.to_string()))?;
    s.runs.write().unwrap().insert(
        run_id.clone(),
        RunEntry { handle: handle.clone(), path, format: req.format },
    );
    tokio::spawn(async move {
        let run = generation.execute(backend, sink.as_mut()).await;
        tracing::info!(run = %run.id, status = ?run.status, produced = run.produced, "run finished");
    });
    Ok((StatusCode::ACCEPTED, Json(RunCreated { run_id })))
}

fn lookup(s: &AppState, id: &str) -> ApiResult<(RunHandle, PathBuf, Format)> {
    let runs = s.runs.read().unwrap();
    let e = runs
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_run", format!("no run `{id}`")))?;
    Ok((e.handle.clone(), e.path.clone(), e.format))
}

async fn list_runs(State(s): State<Shared>) -> Json<Vec<crate::engine::GenerationRun>> {
    let mut runs: Vec<_> = s.runs.read().unwrap().values().map(|e| e.handle.snapshot()).collect();
    runs.sort_by(|a, b| a.id.cmp(&b.id));
    Json(runs)
}

async fn get_run(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<crate::engine::GenerationRun>> {
    Ok(Json(lookup(&s, &id)?.0.snapshot()))
}

async fn cancel_run(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<crate::engine::GenerationRun>> {
    let handle = lookup(&s, &id)?.0;
    handle.cancel();
    Ok(Json(handle.snapshot()))
}

#[derive(Debug, Deserialize)]
pub struct DataQuery {
    pub format: Option<String>,
}

fn finished(handle: &RunHandle, id: &str) -> ApiResult<()> {
    let status = handle.snapshot().status;
    if !status.is_terminal() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "run_not_finished",
            format!("run `{id}` is {status:?}; data is available once it finishes").to_lowercase(),
        ));
    }
    Ok(())
}

async fn load_run_dataset(path: PathBuf, format: Format) -> ApiResult<Dataset> {
    tokio::task::spawn_blocking(move || store::read_dataset(&path, format))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn get_run_data(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<DataQuery>,
) -> ApiResult<Response> {
    let (handle, path, stored) = lookup(&s, &id)?;
    let format = match q.format.as_deref() {
        Some(f) => f.parse::<Format>().map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => stored,
    };
    finished(&handle, &id)?;
    let bytes = if format == stored {
        tokio::fs::read(&path).await.map_err(|e| ApiError::internal(e.to_string()))?
    } else {
        store::to_bytes(&load_run_dataset(path, stored).await?, format)
    };
    let content_type = match format {
        Format::Csv => "text/csv; charset=utf-8",
        Format::Json => "application/json",
    };
    let disposition = format!("attachment; filename=\"{id}.{}\"", format.extension());
    Ok(([(header::CONTENT_TYPE, content_type.to_string()), (header::CONTENT_DISPOSITION, disposition)], bytes).into_response())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum EmbedderChoice {
    #[default]
    Hash,
    Http {
        url: String,
        #[serde(default)]
        model: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MetricsRequest {
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub dataset: Option<Vec<SyntheticSample>>,
    #[serde(default)]
    pub embedder: EmbedderChoice,
    #[serde(default)]
    pub n_values: Option<Vec<usize>>,
    #[serde(default)]
    pub bin_count: Option<usize>,
}

async fn post_metrics(
    State(s): State<Shared>,
    body: Result<Json<MetricsRequest>, JsonRejection>,
) -> ApiResult<Json<DiversityReport>> {
    let Json(req) = body?;
    let dataset = match (req.run_id, req.dataset) {
        (Some(id), None) => {
            let (handle, path, format) = lookup(&s, &id)?;
            finished(&handle, &id)?;
            load_run_dataset(path, format).await?
        }
        (None, Some(samples)) => Dataset::new(samples).map_err(|e| ApiError::bad_request(e.to_string()))?,
        _ => return Err(ApiError::bad_request("give exactly one of runId or dataset")),
    };
    let mut options = ReportOptions::default();
    if let Some(n) = req.n_values {
        options.n_values = n;
    }
    if let Some(b) = req.bin_count {
        options.bin_count = b;
    }
    let embedder = req.embedder;
    let report = tokio::task::spawn_blocking(move || match embedder {
        EmbedderChoice::Hash => diversity_report(&dataset, &HashEmbedder::default(), &options),
        EmbedderChoice::Http { url, model } => diversity_report(&dataset, &HttpEmbedder::new(url, model), &options),
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "metrics", e.to_string()))?;
    Ok(Json(report))
}

/// Binds and serves until the process is interrupted.
pub async fn serve(config: ServiceConfig, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
