//! Serves query reformulation suggestions over HTTP/JSON.
//!
//! `GET /health` reports the loaded model version; `POST /suggest` takes
//! `{"query": …, "k"?: …, "alpha"?: …}` and returns ranked candidates.

mod config;

use std::future::Future;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sequer_core::beam::{suggest, BeamError};
use sequer_core::bpe::BpeModel;
use sequer_core::transducer::AnyModel;
use sequer_core::wire::{clamp_k, ErrorResponse, HealthResponse, SuggestRequest, SuggestResponse, MAX_QUERY_CHARS};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{RwLock, Semaphore};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{ServiceConfig, CONFIG_ENV};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot load checkpoint {path}: {reason}")]
    CorruptCheckpoint { path: String, reason: String },
    #[error("cannot load tokenizer {path}: {reason}")]
    CorruptTokenizer { path: String, reason: String },
    #[error("tokenizer has {bpe} entries but the model expects {model}")]
    VocabMismatch { bpe: usize, model: usize },
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A model with its tokenizer, immutable once loaded.
pub struct LoadedModel {
    pub model: AnyModel,
    pub bpe: BpeModel,
    pub version: String,
}

impl LoadedModel {
    pub fn new(model: AnyModel, bpe: BpeModel, version: String) -> Result<Self, ServiceError> {
        if bpe.vocab_size() != model.config().vocab_size {
            return Err(ServiceError::VocabMismatch { bpe: bpe.vocab_size(), model: model.config().vocab_size });
        }
        Ok(LoadedModel { model, bpe, version })
    }

    /// Reads both files; the version is a digest of the checkpoint bytes.
    pub fn from_files(checkpoint: &Path, bpe: &Path) -> Result<Self, ServiceError> {
        let bytes = std::fs::read(checkpoint).map_err(|e| ServiceError::CorruptCheckpoint { path: checkpoint.display().to_string(), reason: e.to_string() })?;
        let model = AnyModel::read_checkpoint(bytes.as_slice()).map_err(|e| ServiceError::CorruptCheckpoint { path: checkpoint.display().to_string(), reason: e.to_string() })?;
        let tok = std::fs::File::open(bpe)
            .map_err(|e| e.to_string())
            .and_then(|f| BpeModel::read(std::io::BufReader::new(f)).map_err(|e| e.to_string()))
            .map_err(|reason| ServiceError::CorruptTokenizer { path: bpe.display().to_string(), reason })?;
        Self::new(model, tok, model_version(&bytes))
    }
}

/// First 12 hex digits of the SHA-256 of the checkpoint file.
pub fn model_version(checkpoint_bytes: &[u8]) -> String {
    Sha256::digest(checkpoint_bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
}

pub struct AppState {
    model: RwLock<Option<Arc<LoadedModel>>>,
    workers: Arc<Semaphore>,
    default_k: usize,
    default_alpha: f64,
    timeout: Duration,
}

impl AppState {
    pub fn new(model: Option<LoadedModel>, cfg: &ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            model: RwLock::new(model.map(Arc::new)),
            workers: Arc::new(Semaphore::new(cfg.worker_count())),
            default_k: cfg.default_k,
            default_alpha: cfg.default_alpha,
            timeout: Duration::from_millis(cfg.request_timeout_ms),
        })
    }

    /// Swaps the served model; `None` makes /suggest answer 503.
    pub async fn set_model(&self, model: Option<LoadedModel>) {
        *self.model.write().await = model.map(Arc::new);
    }

    async fn current(&self) -> Option<Arc<LoadedModel>> {
        self.model.read().await.clone()
    }
}

fn error(status: StatusCode, code: &str) -> Response {
    (status, Json(ErrorResponse { error: code.to_string() })).into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    match state.current().await {
        Some(m) => Json(HealthResponse { status: "ok".into(), model_version: m.version.clone() }).into_response(),
        None => error(StatusCode::SERVICE_UNAVAILABLE, "model_unavailable"),
    }
}

async fn handle_suggest(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let started = Instant::now();
    let Ok(req) = serde_json::from_slice::<SuggestRequest>(&body) else {
        return error(StatusCode::BAD_REQUEST, "bad_json");
    };
    if req.query.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "empty_query");
    }
    if req.query.chars().count() > MAX_QUERY_CHARS {
        return error(StatusCode::PAYLOAD_TOO_LARGE, "query_too_long");
    }
    let alpha = req.alpha.unwrap_or(state.default_alpha);
    if !(alpha.is_finite() && alpha >= 0.0) {
        return error(StatusCode::BAD_REQUEST, "bad_alpha");
    }
    let k = req.k.map_or(state.default_k, clamp_k);
    let Some(loaded) = state.current().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "model_unavailable");
    };

    let workers = state.workers.clone();
    let query = req.query.clone();
    let work = async move {
        let permit = workers.acquire_owned().await.expect("semaphore is never closed");
        tokio::task::spawn_blocking(move || {
            let _permit = permit;
            suggest(&loaded.model, &loaded.bpe, &query, k, alpha)
        })
        .await
    };
    match tokio::time::timeout(state.timeout, work).await {
        Err(_) => error(StatusCode::GATEWAY_TIMEOUT, "timeout"),
        Ok(Err(join)) => {
            tracing::error!(%join, "suggestion worker failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal")
        }
        Ok(Ok(Err(BeamError::EmptyQuery))) => error(StatusCode::BAD_REQUEST, "empty_query"),
        Ok(Ok(Err(e))) => {
            tracing::error!(error = %e, "suggestion failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal")
        }
        Ok(Ok(Ok(candidates))) => {
            let latency_ms = started.elapsed().as_millis() as u64;
            tracing::debug!(k, latency_ms, n = candidates.len(), "suggest");
            Json(SuggestResponse { query: req.query, candidates, latency_ms }).into_response()
        }
    }
}

fn cors(cfg: &ServiceConfig) -> Option<CorsLayer> {
    let origin = if cfg.allow_any_origin {
        AllowOrigin::any()
    } else if cfg.allowed_origins.is_empty() {
        return None;
    } else {
        AllowOrigin::list(cfg.allowed_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([axum::http::header::CONTENT_TYPE]),
    )
}

pub fn router(state: Arc<AppState>, cfg: &ServiceConfig) -> Router {
    let app = Router::new().route("/health", get(health)).route("/suggest", post(handle_suggest)).with_state(state);
    match cors(cfg) {
        Some(layer) => app.layer(layer),
        None => app,
    }
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(listener: TcpListener, state: Arc<AppState>, cfg: &ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
    axum::serve(listener, router(state, cfg)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Loads the model (failing fast on bad files), binds, and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServiceError> {
    cfg.validate()?;
    let loaded = LoadedModel::from_files(&cfg.checkpoint, &cfg.bpe)?;
    tracing::info!(version = %loaded.version, checkpoint = %cfg.checkpoint.display(), "model loaded");
    let listener = TcpListener::bind(cfg.bind).await.map_err(|source| ServiceError::BindFailure { addr: cfg.bind.to_string(), source })?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let state = AppState::new(Some(loaded), &cfg);
    serve_on(listener, state, &cfg, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
