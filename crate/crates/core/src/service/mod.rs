//! HTTP API: diagnose, chat, ingest, history, health.

mod config;
mod sessions;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::detect::{probe_image, DetectError, Detection, Detector, ImageInput};
use crate::embed::{EmbedError, EmbeddingProvider};
use crate::llmclient::{ChatModel, LlmClient, LlmError};
use crate::pipeline::{ingest_into, IngestSummary, PipelineError};
use crate::ragchat::{Answer, ChatTurn, Clock, RagEngine, RagError, Session, SourceRef};
use crate::vectorstore::{StoreError, VectorStore};

pub use config::{AppConfig, ConfigError, DEFAULT_MAX_UPLOAD_BYTES, DEFAULT_SESSION_TTL_SECS};
pub use sessions::{SessionIds, SessionRegistry, SharedSession};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("detector: {0}")]
    Detector(#[from] DetectError),
    #[error("embedding: {0}")]
    Embed(#[from] EmbedError),
    #[error("llm: {0}")]
    Llm(#[from] LlmError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Non-2xx response, rendered as `{"error":{"code":..,"message":..}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorEnvelope { error: ErrorBody { code: self.code.into(), message: self.message } };
        (self.status, Json(body)).into_response()
    }
}

impl From<DetectError> for ApiError {
    fn from(e: DetectError) -> Self {
        let msg = e.to_string();
        match e {
            DetectError::InvalidImage(_) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_image", msg),
            DetectError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "fixture_not_found", msg),
            DetectError::Transport(_) | DetectError::Protocol(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "detector_unavailable", msg)
            }
            DetectError::Parse { .. } | DetectError::Config(_) | DetectError::Io(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "detector_error", msg)
            }
        }
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        let msg = e.to_string();
        match e {
            RagError::InvalidQuestion(_) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", msg),
            RagError::Llm(LlmError::Config(_)) => ApiError::new(StatusCode::BAD_GATEWAY, "llm_auth_failed", msg),
            RagError::Llm(_) => ApiError::new(StatusCode::BAD_GATEWAY, "llm_unavailable", msg),
            RagError::Embed(EmbedError::DimensionMismatch { .. }) | RagError::Embed(EmbedError::Config(_)) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "embedding_config", msg)
            }
            RagError::Embed(_) => ApiError::new(StatusCode::BAD_GATEWAY, "embedding_unavailable", msg),
            RagError::Store(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", msg),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::Ingest(_) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_kb", msg),
            PipelineError::Embed(EmbedError::Transport(_)) | PipelineError::Embed(EmbedError::Protocol(_)) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "embedding_unavailable", msg)
            }
            PipelineError::Embed(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "embedding_config", msg),
            PipelineError::Store(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", msg),
        }
    }
}

fn multipart_error(e: MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(StatusCode::BAD_REQUEST, "payload_too_large", e.body_text())
    } else {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.body_text())
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", format!("bad JSON body: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseResponse {
    pub session_id: String,
    pub detections: Vec<Detection>,
    pub image_width: u32,
    pub image_height: u32,
    pub answer: String,
    pub sources: Vec<SourceRef>,
    pub covered: bool,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub answer: String,
    pub sources: Vec<SourceRef>,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub documents: usize,
    pub chunks_added: usize,
    pub store_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub session_id: String,
    pub detections: Vec<Detection>,
    pub turns: Vec<ChatTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub store_size: usize,
    pub detector_mode: String,
}

pub struct AppState {
    config: AppConfig,
    detector: Arc<dyn Detector>,
    engine: RagEngine,
    // searches clone the Arc; ingestion builds a new store and swaps it in
    store: RwLock<Arc<VectorStore>>,
    sessions: SessionRegistry,
    ingest_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    /// Builds every component from configuration, loading the store file if present.
    pub fn from_config(config: AppConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let detector = config.detector.build()?;
        let embedder = config.embedding.build()?;
        let llm: Arc<dyn ChatModel> = Arc::new(LlmClient::new(config.llm.clone())?);
        let store = if config.store_path.exists() {
            let s = VectorStore::load(&config.store_path)?;
            if s.dim() != embedder.dim() {
                return Err(ConfigError(format!(
                    "store {} has dim {} but the embedding provider has dim {}",
                    config.store_path.display(),
                    s.dim(),
                    embedder.dim()
                ))
                .into());
            }
            s
        } else {
            VectorStore::new(embedder.dim())
        };
        Ok(Self::with_components(config, detector, embedder, llm, store))
    }

    pub fn with_components(
        config: AppConfig,
        detector: Arc<dyn Detector>,
        embedder: Arc<dyn EmbeddingProvider>,
        llm: Arc<dyn ChatModel>,
        store: VectorStore,
    ) -> Self {
        let clock = config.frozen_time_ms.map_or(Clock::System, Clock::Fixed);
        let engine = RagEngine::new(embedder, llm, config.rag.clone()).with_clock(clock);
        let ids = match &config.session_seed {
            Some(seed) => SessionIds::seeded(seed.clone()),
            None => SessionIds::Random,
        };
        let sessions = SessionRegistry::new(Duration::from_secs(config.session_ttl_secs), ids);
        AppState {
            config,
            detector,
            engine,
            store: RwLock::new(Arc::new(store)),
            sessions,
            ingest_lock: tokio::sync::Mutex::new(()),
        }
    }

    pub fn store(&self) -> Arc<VectorStore> {
        self.store.read().expect("store lock poisoned").clone()
    }

    pub fn sessions(&self) -> &SessionRegistry {
        &self.sessions
    }

    fn ingested_store(&self) -> Result<Arc<VectorStore>, ApiError> {
        let store = self.store();
        if store.is_empty() {
            return Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "store_empty",
                "the knowledge base has not been ingested",
            ));
        }
        Ok(store)
    }
}

fn cors_layer(origins: &[String]) -> CorsLayer {
    let allow = if origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(state: Arc<AppState>) -> Router {
    // multipart framing adds a little on top of the image itself
    let body_limit = state.config.max_upload_bytes.saturating_add(64 * 1024);
    Router::new()
        .route("/api/diagnose", post(diagnose).layer(DefaultBodyLimit::max(body_limit)))
        .route("/api/chat", post(chat))
        .route("/api/ingest", post(ingest))
        .route("/api/sessions/{id}/history", get(history))
        .route("/api/health", get(health))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .layer(cors_layer(&state.config.cors_origins))
        .with_state(state)
}

async fn diagnose(State(st): State<Arc<AppState>>, mut form: Multipart) -> Result<Json<DiagnoseResponse>, ApiError> {
    let mut upload: Option<(Option<String>, Bytes)> = None;
    while let Some(field) = form.next_field().await.map_err(multipart_error)? {
        let is_image = matches!(field.name(), Some("image") | Some("file"));
        if is_image && upload.is_none() {
            let filename = field.file_name().map(str::to_string);
            let bytes = field.bytes().await.map_err(multipart_error)?;
            upload = Some((filename, bytes));
        }
    }
    let (filename, bytes) = upload.ok_or_else(|| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "multipart field \"image\" is required")
    })?;
    if bytes.len() > st.config.max_upload_bytes {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "payload_too_large",
            format!("image is {} bytes; the limit is {}", bytes.len(), st.config.max_upload_bytes),
        ));
    }
    probe_image(&bytes)?;
    let store = st.ingested_store()?;

    let output = st.detector.detect(ImageInput { filename: filename.as_deref(), bytes: &bytes }).await?;
    let mut session = Session::new(st.sessions.next_id(), st.config.rag.window_size, output.detections.clone());
    let answer: Answer = st.engine.diagnose(&store, &mut session).await?;
    let session_id = session.session_id.clone();
    st.sessions.insert(session);

    Ok(Json(DiagnoseResponse {
        session_id,
        detections: output.detections,
        image_width: output.image_width,
        image_height: output.image_height,
        answer: answer.text,
        sources: answer.sources,
        covered: answer.covered,
        model: answer.model_name,
    }))
}

fn unknown_session(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("unknown or expired session {id}"))
}

async fn chat(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Json<ChatResponse>, ApiError> {
    let req: ChatRequest = parse_json(&body)?;
    let shared = st.sessions.get(&req.session_id).ok_or_else(|| unknown_session(&req.session_id))?;
    let mut session = shared.try_lock().map_err(|_| {
        ApiError::new(StatusCode::CONFLICT, "session_busy", "another message for this session is in flight")
    })?;
    let store = st.ingested_store()?;
    let answer = st.engine.answer(&store, &mut session, &req.message).await?;
    Ok(Json(ChatResponse {
        session_id: req.session_id,
        answer: answer.text,
        sources: answer.sources,
        covered: answer.covered,
    }))
}

async fn ingest(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Json<IngestResponse>, ApiError> {
    if !st.config.admin_enabled {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "admin_disabled", "ingestion is disabled"));
    }
    let req: IngestRequest = parse_json(&body)?;
    let _guard = st.ingest_lock.try_lock().map_err(|_| {
        ApiError::new(StatusCode::LOCKED, "ingest_in_progress", "an ingestion is already running")
    })?;

    let mut next = (*st.store()).clone();
    let summary: IngestSummary =
        ingest_into(&mut next, &req.path, &st.config.chunking, st.engine.embedder().as_ref()).await?;
    let next = Arc::new(next);

    let path = st.config.store_path.clone();
    let to_write = next.clone();
    tokio::task::spawn_blocking(move || {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        to_write.persist(&path)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", e.to_string()))?;

    let store_size = next.len();
    *st.store.write().expect("store lock poisoned") = next;
    tracing::info!(documents = summary.documents, chunks_added = summary.chunks_added, store_size, "ingested");
    Ok(Json(IngestResponse { documents: summary.documents, chunks_added: summary.chunks_added, store_size }))
}

async fn history(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<HistoryResponse>, ApiError> {
    let shared = st.sessions.get(&id).ok_or_else(|| unknown_session(&id))?;
    let session = shared.lock().await;
    Ok(Json(HistoryResponse {
        session_id: session.session_id.clone(),
        detections: session.detections.clone(),
        turns: session.turns().to_vec(),
    }))
}

async fn health(State(st): State<Arc<AppState>>) -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        store_size: st.store().len(),
        detector_mode: st.detector.mode().into(),
    })
}

/// Serves on an already-bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Validates config, binds, prints the bound address on stdout, and serves until Ctrl-C.
pub async fn serve(config: AppConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::from_config(config)?);
    let listener = tokio::net::TcpListener::bind(&state.config.bind).await?;
    let addr: SocketAddr = listener.local_addr()?;
    println!("listening on http://{addr}");
    tracing::info!(%addr, store_size = state.store().len(), detector = state.detector.mode(), "serving");
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
