//! Two-part generation flow: image → plain description → personality-aligned
//! caption, with emojize post-processing and an optional tonality
//! regenerate-loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_request, AttributeSet, CaptionFlags, CaptionRequest, DomainError, GeneratedCaption,
    Personality, ValidatedRequest, Variant,
};
use crate::prompting::{render_chat_prompt, render_instruction, PromptError, ShotExample};
use crate::providers::{ChatParams, ProviderClient, ProviderError};
use crate::textproc::{contains_tonality_word, emojize};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("an image reference or a description override is required")]
    MissingInput,
}

/// Generation configuration shared by the CLI and the HTTP service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub shots: u8,
    pub chat: ChatParams,
    /// Regenerate zero-shot captions that contain the tonality word.
    pub post_filter_tonality: bool,
    pub max_regenerations: u32,
    /// Send the fine-tuning style instruction as a single user message
    /// instead of the chat prompt (for instruction-tuned text endpoints).
    pub instruction_endpoint: bool,
    /// Vision captioning model used by the end-to-end path.
    pub caption_model: String,
}

impl PipelineConfig {
    pub fn new(chat: ChatParams) -> PipelineConfig {
        PipelineConfig {
            variant: Variant::Selective,
            shots: 0,
            chat,
            post_filter_tonality: true,
            max_regenerations: 2,
            instruction_endpoint: false,
            caption_model: "blip2-flan-t5-xxl".to_string(),
        }
    }
}

fn effective_params(req: &ValidatedRequest, cfg: &PipelineConfig) -> ChatParams {
    let mut params = cfg.chat.clone();
    if !req.model_id.is_empty() {
        params.model_id = req.model_id.clone();
    }
    params
}

/// Renders the prompt, calls the chat provider, and post-processes completion
/// 0: emojize, then — for zero-shot requests with post-filtering on —
/// regenerate while the caption contains the tonality word, up to
/// `max_regenerations`, returning the last attempt regardless.
pub async fn generate_caption(
    client: &ProviderClient,
    req: &ValidatedRequest,
    cfg: &PipelineConfig,
    shots: &[ShotExample],
) -> Result<GeneratedCaption, PipelineError> {
    let prompt = if cfg.instruction_endpoint {
        if !shots.is_empty() {
            return Err(PromptError::ShotCountMismatch {
                expected: 0,
                got: shots.len(),
            }
            .into());
        }
        render_instruction(req)
    } else {
        render_chat_prompt(req, shots)?
    };
    let params = effective_params(req, cfg);
    let filter_active = cfg.post_filter_tonality && req.shots == 0;

    let mut attempt: u32 = 0;
    loop {
        let reply = client
            .chat_attempt(&prompt.messages, &params, attempt)
            .await?;
        let raw = reply
            .completions
            .first()
            .cloned()
            .ok_or(PipelineError::EmptyCompletion)?;
        if raw.trim().is_empty() {
            return Err(PipelineError::EmptyCompletion);
        }
        let text = emojize(&raw);
        let clean = !contains_tonality_word(&text, req.personality);
        if clean || !filter_active || attempt >= cfg.max_regenerations {
            return Ok(GeneratedCaption {
                text,
                request: req.as_request().clone(),
                primary_caption: req.description.clone(),
                raw_model_output: raw,
                provider_latency_ms: reply.latency_ms,
                cached: reply.cached,
                flags: CaptionFlags {
                    tonality_clean: clean,
                    regenerations: attempt,
                },
            });
        }
        attempt += 1;
    }
}

/// Full two-part flow: describe the image (unless a description override is
/// supplied), then generate the final caption.
#[allow(clippy::too_many_arguments)]
pub async fn generate_end_to_end(
    client: &ProviderClient,
    image_ref: Option<&str>,
    description_override: Option<&str>,
    personality: Personality,
    attributes: AttributeSet,
    cfg: &PipelineConfig,
    shots: &[ShotExample],
) -> Result<GeneratedCaption, PipelineError> {
    let description = match (description_override, image_ref) {
        (Some(description), _) => description.to_string(),
        (None, Some(image_ref)) => client.describe_image(image_ref, &cfg.caption_model).await?,
        (None, None) => return Err(PipelineError::MissingInput),
    };
    let request = validate_request(CaptionRequest {
        description,
        personality,
        attributes,
        variant: cfg.variant,
        shots: cfg.shots,
        model_id: cfg.chat.model_id.clone(),
    })?;
    generate_caption(client, &request, cfg, shots).await
}
