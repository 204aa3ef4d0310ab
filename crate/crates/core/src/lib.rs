//! Brand-personality-aligned social media caption generation and evaluation.
//!
//! The pipeline has two parts: a vision captioning endpoint turns an image
//! into a one-line plain English description (or the user supplies one), and
//! a chat/instruction endpoint turns that description plus a target brand
//! personality and optional attributes (hashtags, usernames, URLs, named
//! entities) into the final social media caption. Generated captions are
//! evaluated with CLIPScore, semantic cosine similarity, an LLM judge with
//! majority voting, and per-kind attribute coverage.

pub mod dataset;
pub mod domain;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
pub mod providers;
pub mod textproc;

pub use domain::{
    validate_request, AttributeKind, AttributeSet, BrandMap, BrandSplit, CaptionFlags,
    CaptionRequest, ChatMessage, DomainError, GeneratedCaption, Personality, PostRecord,
    RawPostRecord, ValidatedRequest, Variant, MAX_SHOTS, PERSONALITY_COUNT,
};
pub use pipeline::{generate_caption, generate_end_to_end, PipelineConfig, PipelineError};
pub use prompting::{
    render_chat_prompt, render_geval_prompt, render_instruction, select_shots, PromptError,
    PromptKind, RenderedPrompt, ShotExample,
};
pub use providers::{
    ChatParams, ChatReply, Embedding, HttpProvider, HttpProviderConfig, MockProvider,
    ModelProvider, ProviderClient, ProviderError, ResponseCache, RetryPolicy,
};
