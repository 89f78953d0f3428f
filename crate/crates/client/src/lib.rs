//! Thin async client for the suggestion service (plain HTTP).

use reqwest::StatusCode;
pub use sequer_core::wire::{ErrorResponse, HealthResponse, SuggestRequest, SuggestResponse, Suggestion};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("service answered {status}: {code}")]
    Api { status: StatusCode, code: String },
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: serde::de::DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let code = match resp.json::<ErrorResponse>().await {
            Ok(e) => e.error,
            Err(_) => status.canonical_reason().unwrap_or("unknown").to_string(),
        };
        Err(ClientError::Api { status, code })
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        Self::decode(self.http.get(format!("{}/health", self.base)).send().await?).await
    }

    pub async fn suggest(&self, query: &str, k: Option<i64>, alpha: Option<f64>) -> Result<SuggestResponse, ClientError> {
        let body = SuggestRequest { query: query.to_string(), k, alpha };
        Self::decode(self.http.post(format!("{}/suggest", self.base)).json(&body).send().await?).await
    }
}
