//! Builds the provider client from configuration and flags.

use std::sync::Arc;
use std::time::Duration;

use brandcap::providers::{
    HttpProvider, HttpProviderConfig, MockProvider, ProviderClient, ResponseCache, RetryPolicy,
};

use crate::config::AppConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProviderKind {
    /// Deterministic offline mock.
    Mock,
    /// OpenAI-compatible HTTP endpoint (requires PROVIDER_BASE_URL).
    Http,
}

pub fn build_client(
    config: &AppConfig,
    kind: Option<ProviderKind>,
    seed: u64,
) -> Result<ProviderClient, CliError> {
    let kind = kind.unwrap_or(if config.base_url.is_some() {
        ProviderKind::Http
    } else {
        ProviderKind::Mock
    });
    let mut client = match kind {
        ProviderKind::Mock => ProviderClient::new(Arc::new(MockProvider::new(seed))),
        ProviderKind::Http => {
            let base_url = config.base_url.clone().ok_or_else(|| {
                CliError::User(
                    "the http provider needs PROVIDER_BASE_URL (env, config file, or flag)"
                        .to_string(),
                )
            })?;
            let mut http = HttpProviderConfig::new(base_url);
            if let Some(key) = &config.api_key {
                http = http.with_api_key(key.clone());
            }
            let provider =
                HttpProvider::new(http).map_err(|e| CliError::Provider(e.to_string()))?;
            ProviderClient::new(Arc::new(provider))
        }
    };
    client = client
        .with_inflight_limit(config.max_inflight)
        .with_retry(RetryPolicy {
            max_retries: config.max_retries,
            initial_backoff: Duration::from_millis(config.initial_backoff_ms),
            multiplier: 2,
        });
    if let Some(dir) = &config.cache_dir {
        let cache = ResponseCache::new(dir).map_err(|e| CliError::Provider(e.to_string()))?;
        client = client.with_cache(cache);
    }
    Ok(client)
}
