//! HTTP service.
//!
//! | Method | Path | Body | Result |
//! |---|---|---|---|
//! | GET | `/health` | | `{service, version}`, never needs a token |
//! | POST | `/studies` | multipart, one DICOM file per part | series summary |
//! | GET | `/studies` | | studies with their series |
//! | GET | `/series/{id}` | | series summary |
//! | GET | `/series/{id}/slices/{k}` | | raw i16 LE slice, metadata in `x-*` headers |
//! | POST | `/series/{id}/segmentations` | exchange document or structure set | `{version}` |
//! | GET | `/series/{id}/segmentations` | | version lineage |
//! | GET | `/series/{id}/segmentations/{v}` | | exchange document |
//! | POST | `/series/{id}/segmentations/{v}/edits` | `{roi_number, strokes, require_latest?}` | `{version, …}` |
//! | GET | `/series/{id}/reports` | | stored evaluation reports |
//! | POST | `/evaluate` | `{series_id, pred_version, gt_version}` | report + discrepancy version |
//! | GET/POST | `/models` | manifest | manifests |
//! | POST | `/jobs` | `{model_id, series_id}`, optional `Idempotency-Key` header | job |
//! | GET | `/jobs/{id}` | | job snapshot |
//! | GET | `/executors` | | executor states |
//! | POST | `/export` | `{series_id, pred_version, corrected_version, gt_version?, include_images?}` | tar bundle |
//! | DELETE | `/series/{id}` | | purge receipt |
//!
//! Errors are JSON `{code, message, detail}` where `code` is
//! [`Error::code`]. When a token is configured every route except
//! `/health` needs `Authorization: Bearer <token>`.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::analysis::{evaluate, EvaluationReport};
use crate::contour::{parse_structure_set, rasterize_contours, STRUCTURE_SET_FORMAT};
use crate::dicom::parse_series;
use crate::error::{Error, Result};
use crate::exchange::{SegmentationDocument, SEGMENTATION_FORMAT};
use crate::export::{export_active_learning_bundle, ExportRequest};
use crate::mask::BrushStroke;
use crate::orchestrator::{
    Executor, LocalExecutor, MockExecutor, MockLatencies, ModelManifest, Orchestrator,
    OrchestratorConfig,
};
use crate::store::{PurgeScope, Store};

pub const SERVICE_NAME: &str = "segstudio";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorKind {
    Local,
    Mock,
}

#[derive(Debug, Clone, clap::Parser)]
#[command(name = "segstudio", version, about = "Segmentation service")]
pub struct ApiConfig {
    #[arg(long, env = "SEGSTUDIO_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "SEGSTUDIO_DATA_DIR", default_value = "./segstudio-data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "SEGSTUDIO_EXECUTOR", value_enum, default_value_t = ExecutorKind::Local)]
    pub executor: ExecutorKind,
    /// Number of executors, i.e. jobs running at once.
    #[arg(long, env = "SEGSTUDIO_MAX_JOBS", default_value_t = 1)]
    pub max_jobs: usize,
    /// Jobs allowed to wait before submissions are refused as busy.
    #[arg(long, env = "SEGSTUDIO_QUEUE_LIMIT", default_value_t = 64)]
    pub queue_limit: usize,
    /// Shared bearer token; unset disables authentication.
    #[arg(long, env = "SEGSTUDIO_TOKEN")]
    pub token: Option<String>,
    #[arg(long, env = "SEGSTUDIO_MAX_UPLOAD_MB", default_value_t = 512)]
    pub max_upload_mb: usize,
    /// External model command for non-builtin images (local executor).
    /// Invoked as `<command> <workspace>`.
    #[arg(long, env = "SEGSTUDIO_MODEL_COMMAND")]
    pub model_command: Option<String>,
    /// Artificial execute latency for the mock executor.
    #[arg(long, env = "SEGSTUDIO_MOCK_LATENCY_MS", default_value_t = 0)]
    pub mock_latency_ms: u64,
}

impl ApiConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            port: 0,
            data_dir: data_dir.into(),
            executor: ExecutorKind::Local,
            max_jobs: 1,
            queue_limit: 64,
            token: None,
            max_upload_mb: 512,
            model_command: None,
            mock_latency_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_jobs == 0 {
            return Err(Error::Argument("max-jobs must be at least 1".into()));
        }
        if self.max_upload_mb == 0 {
            return Err(Error::Argument("max-upload-mb must be at least 1".into()));
        }
        Ok(())
    }

    pub fn executors(&self) -> Vec<Arc<dyn Executor>> {
        let root = self.data_dir.join("workspaces");
        (0..self.max_jobs)
            .map(|n| -> Arc<dyn Executor> {
                match self.executor {
                    ExecutorKind::Local => {
                        let mut ex = LocalExecutor::new(
                            format!("local-{n}"),
                            root.join(format!("local-{n}")),
                        );
                        if let Some(cmd) = &self.model_command {
                            ex = ex.with_command(cmd.clone(), Vec::new());
                        }
                        Arc::new(ex)
                    }
                    ExecutorKind::Mock => Arc::new(
                        MockExecutor::new(format!("mock-{n}"), root.join(format!("mock-{n}")))
                            .with_latencies(MockLatencies {
                                execute: Duration::from_millis(self.mock_latency_ms),
                                ..Default::default()
                            }),
                    ),
                }
            })
            .collect()
    }
}

/// Everything a running service needs.
#[derive(Clone)]
pub struct App {
    pub store: Store,
    pub orchestrator: Arc<Orchestrator>,
    token: Option<Arc<str>>,
    max_upload_bytes: usize,
}

impl App {
    pub fn new(
        store: Store,
        orchestrator: Arc<Orchestrator>,
        token: Option<String>,
        max_upload_bytes: usize,
    ) -> Self {
        Self {
            store,
            orchestrator,
            token: token.map(Arc::from),
            max_upload_bytes,
        }
    }

    /// Opens the data directory and starts the executors named by `config`.
    pub fn from_config(config: &ApiConfig) -> Result<Self> {
        config.validate()?;
        let store = Store::open(&config.data_dir)?;
        let orchestrator = Orchestrator::start(
            store.clone(),
            config.executors(),
            OrchestratorConfig {
                queue_limit: config.queue_limit,
            },
        )?;
        Ok(Self::new(
            store,
            Arc::new(orchestrator),
            config.token.clone(),
            config.max_upload_mb * 1024 * 1024,
        ))
    }

    pub fn router(&self) -> Router {
        let protected = Router::new()
            .route("/studies", post(upload_study).get(list_studies))
            .route("/series/{id}", get(get_series).delete(delete_series))
            .route("/series/{id}/slices/{k}", get(get_slice))
            .route(
                "/series/{id}/segmentations",
                post(post_segmentation).get(list_segmentations),
            )
            .route("/series/{id}/segmentations/{v}", get(get_segmentation))
            .route("/series/{id}/segmentations/{v}/edits", post(post_edits))
            .route("/series/{id}/reports", get(list_reports))
            .route("/evaluate", post(post_evaluate))
            .route("/models", get(list_models).post(post_model))
            .route("/jobs", post(post_job))
            .route("/jobs/{id}", get(get_job))
            .route("/executors", get(list_executors))
            .route("/export", post(post_export))
            .route_layer(middleware::from_fn_with_state(
                self.token.clone(),
                require_token,
            ));
        Router::new()
            .route("/health", get(health))
            .merge(protected)
            .fallback(|| async { ApiError(Error::NotFound("no such endpoint".into())) })
            .layer(DefaultBodyLimit::max(self.max_upload_bytes))
            .with_state(self.clone())
    }
}

/// Binds `127.0.0.1:port`, or `0.0.0.0:port` when `public`.
pub fn bind(port: u16, public: bool) -> Result<std::net::TcpListener> {
    let host = if public { [0, 0, 0, 0] } else { [127, 0, 0, 1] };
    let addr = SocketAddr::from((host, port));
    let listener = std::net::TcpListener::bind(addr)
        .map_err(|e| Error::Startup(format!("cannot listen on {addr}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::Startup(format!("configuring listener: {e}")))?;
    Ok(listener)
}

/// Serves until `shutdown` resolves, then stops the orchestrator: running
/// jobs finish, queued jobs fail with `shutdown`.
pub async fn serve(
    app: App,
    listener: std::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)
        .map_err(|e| Error::Startup(format!("adopting listener: {e}")))?;
    let router = app.router();
    let served = axum::serve(listener, router)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(Error::io("serving HTTP"));
    let orchestrator = app.orchestrator.clone();
    tokio::task::spawn_blocking(move || orchestrator.shutdown())
        .await
        .map_err(|e| Error::Startup(format!("shutdown task: {e}")))?;
    served
}

/// A service running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    app: App,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<()>>>,
}

impl ServerHandle {
    /// Starts `app` on `127.0.0.1:port` (0 picks a free port).
    pub fn spawn(app: App, port: u16) -> Result<ServerHandle> {
        let listener = bind(port, false)?;
        let addr = listener
            .local_addr()
            .map_err(|e| Error::Startup(format!("reading bound address: {e}")))?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let served = app.clone();
        let thread = std::thread::Builder::new()
            .name("segstudio-http".into())
            .spawn(move || {
                let rt = tokio::runtime::Builder::new_multi_thread()
                    .enable_all()
                    .build()
                    .map_err(|e| Error::Startup(format!("building runtime: {e}")))?;
                rt.block_on(serve(served, listener, async {
                    let _ = rx.await;
                }))
            })
            .map_err(|e| Error::Startup(format!("spawning server thread: {e}")))?;
        Ok(ServerHandle {
            addr,
            app,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn app(&self) -> &App {
        &self.app
    }

    pub fn shutdown(mut self) -> Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .map_err(|_| Error::Startup("server thread panicked".into()))?,
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

/// Wire form of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::Bounds(_) | Error::Argument(_) | Error::Codec(_) | Error::Parse(_) => {
            StatusCode::BAD_REQUEST
        }
        Error::Geometry(_)
        | Error::GridMismatch(_)
        | Error::SeriesMismatch(_)
        | Error::MixedSeries(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Unsupported(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Conflict(_) => StatusCode::CONFLICT,
        Error::Busy(_) => StatusCode::SERVICE_UNAVAILABLE,
        Error::Unauthorized(_) => StatusCode::UNAUTHORIZED,
        Error::Executor(_) => StatusCode::BAD_GATEWAY,
        Error::Integrity(_) | Error::Startup(_) | Error::Io { .. } => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = ErrorBody {
            code: self.0.code().into(),
            message: self.0.to_string(),
            detail: self.0.detail(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Integrity(format!("request task failed: {e}"))))?
        .map_err(ApiError)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| Error::Parse(format!("request body: {e}")))
}

fn parse_number<T: std::str::FromStr>(what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Argument(format!("{what} must be a non-negative integer, got '{s}'")))
}

async fn require_token(
    State(token): State<Option<Arc<str>>>,
    req: Request,
    next: Next,
) -> Response {
    if let Some(expected) = token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(&*expected) {
            return ApiError(Error::Unauthorized(
                "missing or invalid bearer token".into(),
            ))
            .into_response();
        }
    }
    next.run(req).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "service": SERVICE_NAME,
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn upload_study(State(app): State<App>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut files = Vec::new();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| Error::Parse(format!("multipart body: {e}")))?
    {
        let bytes = field
            .bytes()
            .await
            .map_err(|e| Error::Parse(format!("multipart field: {e}")))?;
        if !bytes.is_empty() {
            files.push(bytes.to_vec());
        }
    }
    if files.is_empty() {
        return Err(Error::Argument("upload contains no files".into()).into());
    }
    let summary = blocking(move || {
        let series = parse_series(&files)?;
        let id = app.store.put_series(&series)?;
        app.store.series_summary(&id)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn list_studies(State(app): State<App>) -> ApiResult<Response> {
    Ok(Json(app.store.list_studies()).into_response())
}

async fn get_series(State(app): State<App>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.store.series_summary(&id)?).into_response())
}

async fn delete_series(State(app): State<App>, Path(id): Path<String>) -> ApiResult<Response> {
    let receipt = blocking(move || app.store.purge_series(&id, PurgeScope::Everything)).await?;
    Ok(Json(receipt).into_response())
}

async fn get_slice(
    State(app): State<App>,
    Path((id, k)): Path<(String, String)>,
) -> ApiResult<Response> {
    let k: usize = parse_number("slice index", &k)?;
    let (bytes, headers) = blocking(move || {
        let series = app.store.get_series(&id)?;
        let slice = series.slice(k)?;
        let (lo, hi) = slice
            .iter()
            .fold((i16::MAX, i16::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let center = (f64::from(lo) + f64::from(hi)) / 2.0;
        let width = (f64::from(hi) - f64::from(lo)).max(1.0);
        let pos = series.grid.index_to_world(crate::ContinuousIndex {
            i: 0.0,
            j: 0.0,
            k: k as f64,
        });
        let g = &series.grid;
        let mut h = HeaderMap::new();
        let mut put = |name: &'static str, value: String| {
            h.insert(
                name,
                HeaderValue::from_str(&value).expect("ascii header value"),
            );
        };
        put("x-slice-index", k.to_string());
        put("x-columns", g.cols().to_string());
        put("x-rows", g.rows().to_string());
        put("x-slices", g.slices().to_string());
        put("x-window-center", center.to_string());
        put("x-window-width", width.to_string());
        put("x-image-position", format!("{},{},{}", pos.x, pos.y, pos.z));
        put("x-pixel-format", "i16le".into());
        let bytes: Vec<u8> = slice.iter().flat_map(|v| v.to_le_bytes()).collect();
        Ok((bytes, h))
    })
    .await?;
    let mut resp = (headers, bytes).into_response();
    resp.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/octet-stream"),
    );
    Ok(resp)
}

#[derive(Debug, Serialize)]
struct VersionCreated {
    series_id: String,
    version: u64,
    parent_version: Option<u64>,
}

async fn post_segmentation(
    State(app): State<App>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let created = blocking(move || {
        let value: serde_json::Value = parse_json(&body)?;
        let format = value.get("format").and_then(|f| f.as_str());
        if let Some(f) = format.filter(|f| *f != STRUCTURE_SET_FORMAT && *f != SEGMENTATION_FORMAT)
        {
            return Err(Error::Unsupported(format!("document format '{f}'")));
        }
        let set = if format == Some(STRUCTURE_SET_FORMAT) {
            let contours = parse_structure_set(&body)?;
            if contours.series_ref != id {
                return Err(Error::SeriesMismatch(format!(
                    "structure set references series '{}', not '{id}'",
                    contours.series_ref
                )));
            }
            let grid = app.store.series_header(&id)?.grid;
            rasterize_contours(&contours, &grid)?
        } else {
            let doc: SegmentationDocument = serde_json::from_value(value)
                .map_err(|e| Error::Parse(format!("segmentation document: {e}")))?;
            if doc.series_id != id {
                return Err(Error::SeriesMismatch(format!(
                    "document references series '{}', not '{id}'",
                    doc.series_id
                )));
            }
            doc.into_set()?
        };
        let version = app.store.put_segmentation(&id, &set)?;
        Ok(VersionCreated {
            series_id: id,
            version,
            parent_version: set.parent_version,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn list_segmentations(State(app): State<App>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.store.list_versions(&id)?).into_response())
}

async fn get_segmentation(
    State(app): State<App>,
    Path((id, v)): Path<(String, String)>,
) -> ApiResult<Response> {
    let v: u64 = parse_number("version", &v)?;
    let doc = blocking(move || {
        Ok(SegmentationDocument::from_set(
            &app.store.get_segmentation(&id, v)?,
        ))
    })
    .await?;
    Ok(Json(doc).into_response())
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditRequest {
    pub roi_number: u32,
    pub strokes: Vec<BrushStroke>,
    /// Reject the edit unless `{v}` is the newest version.
    #[serde(default = "default_true")]
    pub require_latest: bool,
}

#[derive(Debug, Serialize)]
struct EditResult {
    series_id: String,
    version: u64,
    parent_version: u64,
    roi_number: u32,
    voxel_count: usize,
}

async fn post_edits(
    State(app): State<App>,
    Path((id, v)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let v: u64 = parse_number("version", &v)?;
    let req: EditRequest = parse_json(&body)?;
    let result = blocking(move || {
        let base = app.store.get_segmentation(&id, v)?;
        if req.require_latest {
            let latest = app.store.latest_version(&id)?;
            if latest != Some(v) {
                return Err(Error::Conflict(format!(
                    "version {v} is stale; latest is {}",
                    latest.unwrap_or(0)
                )));
            }
        }
        let mut edited = base.derive_edit();
        edited.edit_roi(req.roi_number, &req.strokes)?;
        let voxel_count = edited
            .roi_by_number(req.roi_number)
            .map(|r| r.mask.count())
            .unwrap_or(0);
        let version = app.store.put_segmentation(&id, &edited)?;
        Ok(EditResult {
            series_id: id,
            version,
            parent_version: v,
            roi_number: req.roi_number,
            voxel_count,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(result)).into_response())
}

async fn list_reports(State(app): State<App>, Path(id): Path<String>) -> ApiResult<Response> {
    let reports = blocking(move || {
        app.store
            .list_reports(&id)?
            .into_iter()
            .map(|r| {
                app.store
                    .get_report(&id, &r.report_id)
                    .map(|rep| (r.report_id, rep))
            })
            .collect::<Result<Vec<_>>>()
    })
    .await?;
    let body: Vec<_> = reports
        .into_iter()
        .map(|(id, report)| EvaluateResponse {
            report_id: id,
            report,
        })
        .collect();
    Ok(Json(body).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateRequest {
    #[serde(alias = "series")]
    pub series_id: String,
    pub pred_version: u64,
    pub gt_version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub report_id: String,
    pub report: EvaluationReport,
}

async fn post_evaluate(State(app): State<App>, body: Bytes) -> ApiResult<Response> {
    let req: EvaluateRequest = parse_json(&body)?;
    let resp = blocking(move || {
        let pred = app
            .store
            .get_segmentation(&req.series_id, req.pred_version)?;
        let gt = app.store.get_segmentation(&req.series_id, req.gt_version)?;
        let (mut report, discrepancy) = evaluate(&pred, &gt)?;
        report.discrepancy_version =
            Some(app.store.put_segmentation(&req.series_id, &discrepancy)?);
        let report_id = app.store.put_report(&report)?;
        Ok(EvaluateResponse { report_id, report })
    })
    .await?;
    Ok(Json(resp).into_response())
}

async fn list_models(State(app): State<App>) -> ApiResult<Response> {
    Ok(Json(app.orchestrator.list_models()).into_response())
}

async fn post_model(State(app): State<App>, body: Bytes) -> ApiResult<Response> {
    let manifest: ModelManifest = parse_json(&body)?;
    let m = blocking(move || app.orchestrator.register_model(manifest)).await?;
    Ok((StatusCode::CREATED, Json(m)).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRequest {
    pub model_id: String,
    #[serde(alias = "series")]
    pub series_id: String,
    #[serde(default)]
    pub idempotency_key: Option<String>,
}

async fn post_job(State(app): State<App>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let req: JobRequest = parse_json(&body)?;
    let key = headers
        .get("idempotency-key")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .or(req.idempotency_key);
    let job = blocking(move || {
        app.orchestrator
            .submit_job(&req.model_id, &req.series_id, key.as_deref())
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn get_job(State(app): State<App>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.orchestrator.job_status(&id)?).into_response())
}

async fn list_executors(State(app): State<App>) -> ApiResult<Response> {
    Ok(Json(app.orchestrator.executors()).into_response())
}

async fn post_export(State(app): State<App>, body: Bytes) -> ApiResult<Response> {
    let req: ExportRequest = parse_json(&body)?;
    let (bytes, _) = blocking(move || export_active_learning_bundle(&app.store, &req)).await?;
    let mut resp = bytes.into_response();
    let h = resp.headers_mut();
    h.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/x-tar"),
    );
    h.insert(
        header::CONTENT_DISPOSITION,
        HeaderValue::from_static("attachment; filename=\"bundle.tar\""),
    );
    Ok(resp)
}
