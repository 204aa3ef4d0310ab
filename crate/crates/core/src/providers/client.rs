//! Provider client: wraps a backend with retry, response caching, and an
//! in-flight concurrency bound. This is the handle the pipeline and metrics
//! layers talk to.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::domain::ChatMessage;

use super::cache::{cache_key, ResponseCache};
use super::{ChatParams, Embedding, ModelProvider, ProviderError, RetryPolicy};

/// Result of a chat call, with cache provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub completions: Vec<String>,
    pub cached: bool,
    pub latency_ms: u64,
}

#[derive(Clone)]
pub struct ProviderClient {
    provider: Arc<dyn ModelProvider>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    inflight: Arc<Semaphore>,
}

impl ProviderClient {
    pub fn new(provider: Arc<dyn ModelProvider>) -> ProviderClient {
        ProviderClient {
            provider,
            cache: None,
            retry: RetryPolicy::default(),
            inflight: Arc::new(Semaphore::new(4)),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> ProviderClient {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> ProviderClient {
        self.retry = retry;
        self
    }

    pub fn with_inflight_limit(mut self, limit: usize) -> ProviderClient {
        self.inflight = Arc::new(Semaphore::new(limit.max(1)));
        self
    }

    async fn run_with_retry<T, F, Fut>(&self, mut call: F) -> Result<T, ProviderError>
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = Result<T, ProviderError>>,
    {
        let mut attempt = 0;
        loop {
            let permit = self
                .inflight
                .acquire()
                .await
                .expect("in-flight semaphore never closes");
            let result = call().await;
            drop(permit);
            match result {
                Err(ProviderError::Transient(msg)) if attempt < self.retry.max_retries => {
                    tokio::time::sleep(self.retry.backoff(attempt)).await;
                    attempt += 1;
                    let _ = msg;
                }
                Err(ProviderError::Transient(msg)) => {
                    return Err(ProviderError::Unavailable(format!(
                        "retries exhausted after {} attempts: {msg}",
                        attempt + 1
                    )));
                }
                other => return other,
            }
        }
    }

    /// Chat with `attempt = 0`. Regenerations pass a distinct attempt so the
    /// cache does not replay the rejected completion.
    pub async fn chat(
        &self,
        messages: &[ChatMessage],
        params: &ChatParams,
    ) -> Result<ChatReply, ProviderError> {
        self.chat_attempt(messages, params, 0).await
    }

    pub async fn chat_attempt(
        &self,
        messages: &[ChatMessage],
        params: &ChatParams,
        attempt: u32,
    ) -> Result<ChatReply, ProviderError> {
        if messages.is_empty() {
            return Err(ProviderError::EmptyInput("chat messages"));
        }
        let started = std::time::Instant::now();
        match self.chat_cached_call(messages, params, attempt).await {
            Ok((completions, cached)) => Ok(ChatReply {
                completions,
                cached,
                latency_ms: if cached {
                    0
                } else {
                    started.elapsed().as_millis() as u64
                },
            }),
            // some endpoints reject n>1; fall back to n sequential calls
            Err(ProviderError::InvalidRequest(_)) if params.n > 1 => {
                let single = params.clone().with_n(1);
                let mut collected = Vec::with_capacity(params.n as usize);
                let mut all_cached = true;
                for i in 0..params.n {
                    let (sub, cached) = self
                        .chat_cached_call(messages, &single, attempt * 1000 + i + 1)
                        .await?;
                    all_cached &= cached;
                    collected.extend(sub);
                }
                Ok(ChatReply {
                    completions: collected,
                    cached: all_cached,
                    latency_ms: if all_cached {
                        0
                    } else {
                        started.elapsed().as_millis() as u64
                    },
                })
            }
            Err(e) => Err(e),
        }
    }

    /// One cache-backed provider call; no n>1 fallback.
    async fn chat_cached_call(
        &self,
        messages: &[ChatMessage],
        params: &ChatParams,
        attempt: u32,
    ) -> Result<(Vec<String>, bool), ProviderError> {
        let payload = serde_json::json!({
            "messages": messages,
            "params": params,
            "attempt": attempt,
        });
        let key = cache_key("chat", &params.model_id, &payload);
        if let Some(cache) = &self.cache {
            if let Some(completions) = cache.get::<Vec<String>>(&key) {
                return Ok((completions, true));
            }
        }
        let completions = self
            .run_with_retry(|| self.provider.chat(messages, params))
            .await?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &completions)?;
        }
        Ok((completions, false))
    }

    pub async fn embed_text(&self, text: &str, model_id: &str) -> Result<Embedding, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyInput("embedding text"));
        }
        let payload = serde_json::json!({ "text": text });
        let key = cache_key("embed_text", model_id, &payload);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get::<Embedding>(&key) {
                return Ok(hit);
            }
        }
        let embedding = self
            .run_with_retry(|| self.provider.embed_text(text, model_id))
            .await?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &embedding)?;
        }
        Ok(embedding)
    }

    pub async fn embed_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<Embedding, ProviderError> {
        super::resolve_image_ref(image_ref)?;
        let payload = serde_json::json!({ "image_ref": image_ref });
        let key = cache_key("embed_image", model_id, &payload);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get::<Embedding>(&key) {
                return Ok(hit);
            }
        }
        let embedding = self
            .run_with_retry(|| self.provider.embed_image(image_ref, model_id))
            .await?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &embedding)?;
        }
        Ok(embedding)
    }

    pub async fn describe_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<String, ProviderError> {
        super::resolve_image_ref(image_ref)?;
        let payload = serde_json::json!({ "image_ref": image_ref });
        let key = cache_key("describe_image", model_id, &payload);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get::<String>(&key) {
                return Ok(hit);
            }
        }
        let description = self
            .run_with_retry(|| self.provider.describe_image(image_ref, model_id))
            .await?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &description)?;
        }
        Ok(description)
    }
}
