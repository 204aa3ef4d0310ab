//! Clients for external model endpoints: chat completion, text and image
//! embedding, and image captioning — with retry, an in-flight bound, response
//! caching, and a deterministic mock for offline tests.

mod cache;
mod client;
mod http;
mod mock;

use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::ChatMessage;

pub use cache::{cache_key, ResponseCache, CACHE_VERSION};
pub use client::{ChatReply, ProviderClient};
pub use http::{HttpProvider, HttpProviderConfig};
pub use mock::MockProvider;

/// Sampling parameters for chat completion calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    /// Number of completions to request.
    pub n: u32,
}

impl ChatParams {
    /// Defaults: temperature 0.7, top_p 0.95, both penalties 0, n 1.
    pub fn new(model_id: impl Into<String>) -> ChatParams {
        ChatParams {
            model_id: model_id.into(),
            temperature: 0.7,
            top_p: 0.95,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            n: 1,
        }
    }

    pub fn with_n(mut self, n: u32) -> ChatParams {
        self.n = n;
        self
    }
}

/// A dense embedding vector returned by an embedding endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub dim: usize,
    pub model_id: String,
}

impl Embedding {
    pub fn new(vector: Vec<f64>, model_id: impl Into<String>) -> Result<Embedding, ProviderError> {
        if vector.is_empty() {
            return Err(ProviderError::MalformedResponse(
                "embedding vector is empty".to_string(),
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::MalformedResponse(
                "embedding vector contains non-finite entries".to_string(),
            ));
        }
        Ok(Embedding {
            dim: vector.len(),
            vector,
            model_id: model_id.into(),
        })
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Retries exhausted or the endpoint is unreachable.
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("authentication with the provider failed")]
    Auth,
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    /// A retryable failure (HTTP 429/5xx, timeout). The client retries these
    /// and converts them to `Unavailable` once the budget is spent.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider rejected the request: {0}")]
    InvalidRequest(String),
    #[error("image not found: {0}")]
    ImageNotFound(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("cache failure: {0}")]
    Cache(String),
}

/// One backend able to serve all four endpoint kinds.
#[async_trait]
pub trait ModelProvider: Send + Sync {
    async fn chat(
        &self,
        messages: &[ChatMessage],
        params: &ChatParams,
    ) -> Result<Vec<String>, ProviderError>;

    async fn embed_text(&self, text: &str, model_id: &str) -> Result<Embedding, ProviderError>;

    async fn embed_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<Embedding, ProviderError>;

    async fn describe_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<String, ProviderError>;
}

/// An image reference resolves when it is a syntactically valid http(s) URL
/// or an existing file.
pub fn resolve_image_ref(image_ref: &str) -> Result<(), ProviderError> {
    let lower = image_ref.to_lowercase();
    if lower.starts_with("http://") || lower.starts_with("https://") {
        let rest = &image_ref[image_ref.find("://").unwrap() + 3..];
        if !rest.is_empty() && !rest.chars().any(char::is_whitespace) {
            return Ok(());
        }
        return Err(ProviderError::ImageNotFound(image_ref.to_string()));
    }
    if Path::new(image_ref).is_file() {
        return Ok(());
    }
    Err(ProviderError::ImageNotFound(image_ref.to_string()))
}

/// Exponential backoff policy for transient failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub multiplier: u32,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; used by tests.
    pub fn immediate(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            initial_backoff: Duration::ZERO,
            multiplier: 2,
        }
    }

    /// Backoff before retry `attempt` (0-based). Non-decreasing.
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff * self.multiplier.pow(attempt)
    }
}
