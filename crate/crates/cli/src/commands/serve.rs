//! `brandcap serve`: the HTTP caption service. One endpoint,
//! `POST /v1/captions`, validated exactly like the CLI path.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use brandcap::dataset::read_shot_examples;
use brandcap::domain::{AttributeSet, Personality, Variant};
use brandcap::pipeline::{generate_end_to_end, PipelineConfig, PipelineError};
use brandcap::prompting::{select_shots, ShotExample};
use brandcap::providers::{ChatParams, ProviderClient};

use crate::config::AppConfig;
use crate::provider::{build_client, ProviderKind};
use crate::CliError;

#[derive(Args)]
pub struct ServeArgs {
    /// Bind address; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:8787")]
    addr: SocketAddr,

    /// JSONL pool of shot examples enabling few-shot requests.
    #[arg(long)]
    shots_file: Option<PathBuf>,
}

struct AppState {
    client: ProviderClient,
    base_cfg: PipelineConfig,
    shots_pool: Vec<ShotExample>,
    limiter: Arc<Semaphore>,
    seed: u64,
}

#[derive(Deserialize)]
struct CaptionBody {
    description: Option<String>,
    image_ref: Option<String>,
    personality: Option<String>,
    #[serde(default)]
    attributes: AttributeSet,
    variant: Option<String>,
    shots: Option<u8>,
}

#[derive(Serialize)]
struct FieldError {
    field: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ErrorBody {
    errors: Vec<FieldError>,
}

#[derive(Serialize)]
struct CaptionResponse {
    caption: String,
    primary_caption: String,
    flags: ResponseFlags,
}

#[derive(Serialize)]
struct ResponseFlags {
    tonality_clean: bool,
    cached: bool,
}

fn bad_request(errors: Vec<FieldError>) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { errors })).into_response()
}

fn field_error(field: &'static str, message: impl Into<String>) -> FieldError {
    FieldError {
        field,
        message: message.into(),
    }
}

async fn create_caption(
    State(state): State<Arc<AppState>>,
    Json(value): Json<serde_json::Value>,
) -> Response {
    let Ok(_permit) = state.limiter.try_acquire() else {
        return (
            StatusCode::TOO_MANY_REQUESTS,
            Json(ErrorBody {
                errors: vec![field_error("", "in-flight limit saturated, retry later")],
            }),
        )
            .into_response();
    };

    let body: CaptionBody = match serde_json::from_value(value) {
        Ok(body) => body,
        Err(e) => return bad_request(vec![field_error("", e.to_string())]),
    };

    let mut errors = Vec::new();
    let personality = match body.personality.as_deref() {
        Some(raw) => match Personality::parse(raw) {
            Ok(p) => Some(p),
            Err(e) => {
                errors.push(field_error("personality", e.to_string()));
                None
            }
        },
        None => {
            errors.push(field_error("personality", "field is required"));
            None
        }
    };
    if body.description.is_some() == body.image_ref.is_some() {
        errors.push(field_error(
            "description",
            "exactly one of description or image_ref is required",
        ));
    }
    let variant = match body.variant.as_deref() {
        None => Some(state.base_cfg.variant),
        Some(raw) => match raw.parse::<Variant>() {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(field_error("variant", e));
                None
            }
        },
    };
    let shots = body.shots.unwrap_or(0);
    if shots > brandcap::MAX_SHOTS {
        errors.push(field_error("shots", "shots must be between 0 and 4"));
    }
    if !errors.is_empty() {
        return bad_request(errors);
    }
    let (personality, variant) = (personality.unwrap(), variant.unwrap());

    let selected = if shots > 0 {
        match select_shots(&state.shots_pool, personality, shots as usize, state.seed) {
            Ok(selected) => selected,
            Err(e) => return bad_request(vec![field_error("shots", e.to_string())]),
        }
    } else {
        Vec::new()
    };

    let mut cfg = state.base_cfg.clone();
    cfg.variant = variant;
    cfg.shots = shots;
    let result = generate_end_to_end(
        &state.client,
        body.image_ref.as_deref(),
        body.description.as_deref(),
        personality,
        body.attributes,
        &cfg,
        &selected,
    )
    .await;

    match result {
        Ok(caption) => (
            StatusCode::OK,
            Json(CaptionResponse {
                caption: caption.text,
                primary_caption: caption.primary_caption,
                flags: ResponseFlags {
                    tonality_clean: caption.flags.tonality_clean,
                    cached: caption.cached,
                },
            }),
        )
            .into_response(),
        Err(PipelineError::Provider(e)) => (
            StatusCode::BAD_GATEWAY,
            Json(ErrorBody {
                errors: vec![field_error("", e.to_string())],
            }),
        )
            .into_response(),
        Err(e) => bad_request(vec![field_error("", e.to_string())]),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

pub async fn run(
    args: ServeArgs,
    config: &AppConfig,
    kind: Option<ProviderKind>,
    seed: u64,
) -> Result<(), CliError> {
    let client = build_client(config, kind, seed)?;
    let shots_pool = match &args.shots_file {
        Some(path) => read_shot_examples(path)?,
        None => Vec::new(),
    };
    let mut base_cfg = PipelineConfig::new(ChatParams::new(config.chat_model.clone()));
    base_cfg.caption_model = config.caption_model.clone();
    let state = Arc::new(AppState {
        client,
        base_cfg,
        shots_pool,
        limiter: Arc::new(Semaphore::new(config.max_inflight.max(1))),
        seed,
    });

    let app = Router::new()
        .route("/v1/captions", post(create_caption))
        .route("/healthz", get(healthz))
        .with_state(state);

    let listener = tokio::net::TcpListener::bind(args.addr)
        .await
        .map_err(|e| CliError::Provider(format!("bind {}: {e}", args.addr)))?;
    let bound = listener
        .local_addr()
        .map_err(|e| CliError::Provider(e.to_string()))?;
    println!("listening on http://{bound}");

    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Provider(e.to_string()))
}
