//! JSON bodies of the suggestion HTTP API.

use serde::{Deserialize, Serialize};

pub use crate::beam::Suggestion;

pub const MAX_QUERY_CHARS: usize = 512;
pub const MAX_K: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub query: String,
    pub candidates: Vec<Suggestion>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_version: String,
}

/// Body of every non-2xx response. `error` is a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Requested k clamped to `[1, MAX_K]`.
pub fn clamp_k(k: i64) -> usize {
    k.clamp(1, MAX_K as i64) as usize
}
