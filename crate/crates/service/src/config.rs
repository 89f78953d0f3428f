use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sequer_core::beam::{DEFAULT_ALPHA, DEFAULT_BEAM};

use crate::ServiceError;

pub const CONFIG_ENV: &str = "SEQUER_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub checkpoint: PathBuf,
    pub bpe: PathBuf,
    pub default_k: usize,
    pub default_alpha: f64,
    /// Origins that receive CORS headers.
    pub allowed_origins: Vec<String>,
    /// Send `Access-Control-Allow-Origin: *`. Off unless explicitly enabled.
    pub allow_any_origin: bool,
    pub request_timeout_ms: u64,
    /// Concurrent beam searches; defaults to the number of logical CPUs.
    pub workers: Option<usize>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            checkpoint: PathBuf::from("model.ckpt"),
            bpe: PathBuf::from("model.bpe"),
            default_k: DEFAULT_BEAM,
            default_alpha: DEFAULT_ALPHA,
            allowed_origins: Vec::new(),
            allow_any_origin: false,
            request_timeout_ms: 10_000,
            workers: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// The file named by `SEQUER_CONFIG`, or defaults when it is unset.
    pub fn from_env() -> Result<Self, ServiceError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Self::from_file(Path::new(&p)),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.default_k == 0 {
            return Err(ServiceError::Config("default_k must be at least 1".into()));
        }
        if !(self.default_alpha.is_finite() && self.default_alpha >= 0.0) {
            return Err(ServiceError::Config("default_alpha must be a non-negative number".into()));
        }
        if self.request_timeout_ms == 0 {
            return Err(ServiceError::Config("request_timeout_ms must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(ServiceError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn worker_count(&self) -> usize {
        self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
