//! OpenAI-compatible HTTP backend: `/v1/chat/completions` for chat and image
//! description, `/v1/embeddings` for text and image embeddings. Any server
//! speaking this protocol (including local open-source stacks) is a drop-in.

use std::fmt;
use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::Deserialize;

use crate::domain::ChatMessage;

use super::{ChatParams, Embedding, ModelProvider, ProviderError};

#[derive(Clone)]
pub struct HttpProviderConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpProviderConfig {
    pub fn new(base_url: impl Into<String>) -> HttpProviderConfig {
        HttpProviderConfig {
            base_url: base_url.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> HttpProviderConfig {
        self.api_key = Some(key.into());
        self
    }
}

// the API key must never leak through Debug output or error text
impl fmt::Debug for HttpProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProviderConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "***"))
            .field("timeout", &self.timeout)
            .finish()
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<HttpProvider, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Unavailable(format!("http client: {e}")))?;
        Ok(HttpProvider { config, client })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    async fn post_json(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, ProviderError> {
        let mut request = self
            .client
            .post(self.endpoint(path))
            .header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let response = request.json(body).send().await.map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                ProviderError::Transient(format!("request failed: {e}"))
            } else {
                ProviderError::Unavailable(format!("request failed: {e}"))
            }
        })?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ProviderError::Auth);
        }
        let body_text = response.text().await.unwrap_or_default();
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(ProviderError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let snippet: String = body_text.chars().take(200).collect();
            return Err(ProviderError::InvalidRequest(format!(
                "HTTP {status}: {snippet}"
            )));
        }
        serde_json::from_str(&body_text)
            .map_err(|e| ProviderError::MalformedResponse(format!("invalid JSON: {e}")))
    }

    /// Local files are inlined as base64 data URIs; anything else is passed
    /// through as a URL.
    fn image_payload(image_ref: &str) -> Result<String, ProviderError> {
        let path = Path::new(image_ref);
        if path.is_file() {
            let bytes = std::fs::read(path)
                .map_err(|_| ProviderError::ImageNotFound(image_ref.to_string()))?;
            let media = match path.extension().and_then(|e| e.to_str()) {
                Some("png") => "image/png",
                Some("gif") => "image/gif",
                Some("webp") => "image/webp",
                _ => "image/jpeg",
            };
            let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
            Ok(format!("data:{media};base64,{encoded}"))
        } else {
            Ok(image_ref.to_string())
        }
    }
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

#[async_trait::async_trait]
impl ModelProvider for HttpProvider {
    async fn chat(
        &self,
        messages: &[ChatMessage],
        params: &ChatParams,
    ) -> Result<Vec<String>, ProviderError> {
        let body = serde_json::json!({
            "model": params.model_id,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "frequency_penalty": params.frequency_penalty,
            "presence_penalty": params.presence_penalty,
            "n": params.n,
        });
        let value = self.post_json("v1/chat/completions", &body).await?;
        let parsed: ChatCompletionResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::MalformedResponse(format!("chat response: {e}")))?;
        if parsed.choices.is_empty() {
            return Err(ProviderError::MalformedResponse(
                "chat response has no choices".to_string(),
            ));
        }
        Ok(parsed
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect())
    }

    async fn embed_text(&self, text: &str, model_id: &str) -> Result<Embedding, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyInput("embedding text"));
        }
        let body = serde_json::json!({ "model": model_id, "input": text });
        let value = self.post_json("v1/embeddings", &body).await?;
        let parsed: EmbeddingsResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::MalformedResponse(format!("embeddings response: {e}")))?;
        let datum = parsed.data.into_iter().next().ok_or_else(|| {
            ProviderError::MalformedResponse("embeddings response has no data".to_string())
        })?;
        Embedding::new(datum.embedding, model_id)
    }

    async fn embed_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<Embedding, ProviderError> {
        let payload = Self::image_payload(image_ref)?;
        let body = serde_json::json!({ "model": model_id, "input": [payload] });
        let value = self.post_json("v1/embeddings", &body).await?;
        let parsed: EmbeddingsResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::MalformedResponse(format!("embeddings response: {e}")))?;
        let datum = parsed.data.into_iter().next().ok_or_else(|| {
            ProviderError::MalformedResponse("embeddings response has no data".to_string())
        })?;
        Embedding::new(datum.embedding, model_id)
    }

    async fn describe_image(
        &self,
        image_ref: &str,
        model_id: &str,
    ) -> Result<String, ProviderError> {
        let payload = Self::image_payload(image_ref)?;
        let body = serde_json::json!({
            "model": model_id,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text",
                     "text": "Describe this image in one short plain English sentence."},
                    {"type": "image_url", "image_url": {"url": payload}},
                ],
            }],
            "temperature": 0.0,
            "n": 1,
        });
        let value = self.post_json("v1/chat/completions", &body).await?;
        let parsed: ChatCompletionResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::MalformedResponse(format!("chat response: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                ProviderError::MalformedResponse("caption response has no content".to_string())
            })?;
        Ok(content
            .lines()
            .next()
            .unwrap_or_default()
            .trim()
            .to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debug_output_redacts_the_api_key() {
        let config =
            HttpProviderConfig::new("https://api.example.com").with_api_key("sk-super-secret-key");
        let rendered = format!("{config:?}");
        assert!(!rendered.contains("sk-super-secret-key"));
        assert!(rendered.contains("***"));
    }

    #[test]
    fn endpoints_join_without_duplicate_slashes() {
        let provider =
            HttpProvider::new(HttpProviderConfig::new("https://api.example.com/")).unwrap();
        assert_eq!(
            provider.endpoint("v1/chat/completions"),
            "https://api.example.com/v1/chat/completions"
        );
    }

    #[test]
    fn remote_refs_pass_through_and_local_files_become_data_uris() {
        assert_eq!(
            HttpProvider::image_payload("https://cdn.example.com/a.jpg").unwrap(),
            "https://cdn.example.com/a.jpg"
        );
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("img.png");
        std::fs::write(&file, [1u8, 2, 3]).unwrap();
        let payload = HttpProvider::image_payload(file.to_str().unwrap()).unwrap();
        assert!(payload.starts_with("data:image/png;base64,"));
    }
}
