//! Application configuration. Precedence: CLI flag > environment variable >
//! config file > default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub embed_text_model: String,
    pub embed_image_model: String,
    pub caption_model: String,
    pub cache_dir: Option<PathBuf>,
    pub max_inflight: usize,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub seed: u64,
}

impl Default for AppConfig {
    fn default() -> AppConfig {
        AppConfig {
            base_url: None,
            api_key: None,
            chat_model: "gpt-3.5-turbo".to_string(),
            embed_text_model: "all-mpnet-base-v2".to_string(),
            embed_image_model: "ViT-B-32".to_string(),
            caption_model: "blip2-flan-t5-xxl".to_string(),
            cache_dir: None,
            max_inflight: 4,
            max_retries: 3,
            initial_backoff_ms: 500,
            seed: 0,
        }
    }
}

impl AppConfig {
    /// Defaults, overlaid with the config file (if given), overlaid with the
    /// environment. CLI flags are applied by the caller afterwards.
    pub fn load(file: Option<&Path>) -> Result<AppConfig> {
        let mut config = AppConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!("{}:{}: expected key = value", path.display(), lineno + 1);
                };
                config
                    .apply(key.trim(), value.trim())
                    .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
            }
        }
        for key in [
            "PROVIDER_BASE_URL",
            "PROVIDER_API_KEY",
            "CHAT_MODEL",
            "EMBED_TEXT_MODEL",
            "EMBED_IMAGE_MODEL",
            "CAPTION_MODEL",
            "CACHE_DIR",
            "MAX_INFLIGHT",
        ] {
            if let Ok(value) = std::env::var(key) {
                config.apply(key, &value)?;
            }
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key.to_uppercase().as_str() {
            "PROVIDER_BASE_URL" => self.base_url = Some(value.to_string()),
            "PROVIDER_API_KEY" => self.api_key = Some(value.to_string()),
            "CHAT_MODEL" => self.chat_model = value.to_string(),
            "EMBED_TEXT_MODEL" => self.embed_text_model = value.to_string(),
            "EMBED_IMAGE_MODEL" => self.embed_image_model = value.to_string(),
            "CAPTION_MODEL" => self.caption_model = value.to_string(),
            "CACHE_DIR" => self.cache_dir = Some(PathBuf::from(value)),
            "MAX_INFLIGHT" => {
                self.max_inflight = value
                    .parse()
                    .with_context(|| format!("MAX_INFLIGHT: {value:?}"))?;
            }
            "MAX_RETRIES" => {
                self.max_retries = value
                    .parse()
                    .with_context(|| format!("MAX_RETRIES: {value:?}"))?;
            }
            "INITIAL_BACKOFF_MS" => {
                self.initial_backoff_ms = value
                    .parse()
                    .with_context(|| format!("INITIAL_BACKOFF_MS: {value:?}"))?;
            }
            "SEED" => {
                self.seed = value.parse().with_context(|| format!("SEED: {value:?}"))?;
            }
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }
}
