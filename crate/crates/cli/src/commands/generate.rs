//! `brandcap generate`: single-request and batch caption generation.

use std::io::BufRead;
use std::path::PathBuf;

use clap::Args;
use futures::stream::{self, StreamExt};

use brandcap::dataset::read_shot_examples;
use brandcap::domain::{
    validate_request, AttributeSet, CaptionRequest, Personality, ValidatedRequest, Variant,
};
use brandcap::pipeline::{generate_caption, generate_end_to_end, PipelineConfig};
use brandcap::prompting::{select_shots, ShotExample};
use brandcap::providers::{ChatParams, ProviderClient};

use crate::config::AppConfig;
use crate::provider::{build_client, ProviderKind};
use crate::CliError;

#[derive(Args)]
pub struct GenerateArgs {
    /// Image reference (file path or URL); mutually exclusive with
    /// --description.
    #[arg(long)]
    image: Option<String>,

    /// One-line image description; skips the vision captioning step.
    #[arg(long)]
    description: Option<String>,

    /// Target brand personality (sincerity, excitement, competence,
    /// sophistication, ruggedness).
    #[arg(long)]
    personality: Option<String>,

    /// Hashtag to include (repeatable).
    #[arg(long = "hashtag")]
    hashtags: Vec<String>,

    /// Username to include (repeatable).
    #[arg(long = "username")]
    usernames: Vec<String>,

    /// URL to include (repeatable).
    #[arg(long = "url")]
    urls: Vec<String>,

    /// Named entity to include (repeatable).
    #[arg(long = "entity")]
    entities: Vec<String>,

    /// Instruction variant: selective or nonselective.
    #[arg(long, default_value = "selective")]
    variant: String,

    /// Number of in-context examples (0..=4); needs --shots-file when > 0.
    #[arg(long, default_value_t = 0)]
    shots: u8,

    /// JSONL pool of shot examples for few-shot prompting.
    #[arg(long)]
    shots_file: Option<PathBuf>,

    /// Chat model id override.
    #[arg(long)]
    model: Option<String>,

    /// Output path; "-" or absent writes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSONL file of caption requests; generates one caption per line.
    #[arg(long)]
    batch: Option<PathBuf>,

    /// Disable the zero-shot tonality regenerate-loop.
    #[arg(long)]
    no_tonality_filter: bool,

    /// Regeneration budget for the tonality filter.
    #[arg(long, default_value_t = 2)]
    max_regenerations: u32,

    /// Send the fine-tuning instruction layout as a single user message.
    #[arg(long)]
    instruction_endpoint: bool,
}

fn pipeline_config(args: &GenerateArgs, config: &AppConfig, variant: Variant) -> PipelineConfig {
    let model = args
        .model
        .clone()
        .unwrap_or_else(|| config.chat_model.clone());
    let mut cfg = PipelineConfig::new(ChatParams::new(model));
    cfg.variant = variant;
    cfg.shots = args.shots;
    cfg.post_filter_tonality = !args.no_tonality_filter;
    cfg.max_regenerations = args.max_regenerations;
    cfg.instruction_endpoint = args.instruction_endpoint;
    cfg.caption_model = config.caption_model.clone();
    cfg
}

fn shots_for(
    pool: &[ShotExample],
    personality: Personality,
    k: u8,
    seed: u64,
) -> Result<Vec<ShotExample>, CliError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(CliError::User(
            "--shots > 0 requires --shots-file with candidate examples".to_string(),
        ));
    }
    Ok(select_shots(pool, personality, k as usize, seed)?)
}

pub async fn run(
    args: GenerateArgs,
    config: &AppConfig,
    kind: Option<ProviderKind>,
    seed: u64,
) -> Result<(), CliError> {
    let client = build_client(config, kind, seed)?;
    let pool = match &args.shots_file {
        Some(path) => read_shot_examples(path)?,
        None => Vec::new(),
    };

    if let Some(batch) = &args.batch {
        if args.image.is_some() || args.description.is_some() {
            return Err(CliError::User(
                "--batch cannot be combined with --image/--description".to_string(),
            ));
        }
        return run_batch(&args, config, &client, batch.clone(), &pool, seed).await;
    }

    let personality_raw = args
        .personality
        .as_deref()
        .ok_or_else(|| CliError::User("--personality is required".to_string()))?;
    let personality = Personality::parse(personality_raw)?;
    let variant: Variant = args.variant.parse().map_err(CliError::User)?;
    if args.image.is_some() == args.description.is_some() {
        return Err(CliError::User(
            "exactly one of --image or --description is required".to_string(),
        ));
    }

    let attributes = AttributeSet {
        hashtags: args.hashtags.clone(),
        usernames: args.usernames.clone(),
        urls: args.urls.clone(),
        named_entities: args.entities.clone(),
    };
    let cfg = pipeline_config(&args, config, variant);
    let shots = shots_for(&pool, personality, args.shots, seed)?;
    let caption = generate_end_to_end(
        &client,
        args.image.as_deref(),
        args.description.as_deref(),
        personality,
        attributes,
        &cfg,
        &shots,
    )
    .await?;

    let mut rendered =
        serde_json::to_string_pretty(&caption).map_err(|e| CliError::User(e.to_string()))?;
    rendered.push('\n');
    super::write_output(args.out.as_deref(), &rendered)
}

async fn run_batch(
    args: &GenerateArgs,
    config: &AppConfig,
    client: &ProviderClient,
    batch: PathBuf,
    pool: &[ShotExample],
    seed: u64,
) -> Result<(), CliError> {
    let file = std::fs::File::open(&batch)?;
    let mut requests: Vec<ValidatedRequest> = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: CaptionRequest = serde_json::from_str(&line)
            .map_err(|e| CliError::User(format!("{}:{}: {e}", batch.display(), i + 1)))?;
        requests.push(
            validate_request(request)
                .map_err(|e| CliError::User(format!("{}:{}: {e}", batch.display(), i + 1)))?,
        );
    }

    let results: Vec<Result<brandcap::GeneratedCaption, CliError>> =
        stream::iter(requests.iter().map(|request| {
            let client = client.clone();
            async move {
                let variant = request.variant;
                let mut cfg = pipeline_config(args, config, variant);
                cfg.shots = request.shots;
                let shots = shots_for(pool, request.personality, request.shots, seed)?;
                Ok(generate_caption(&client, request, &cfg, &shots).await?)
            }
        }))
        .buffered(config.max_inflight.max(1))
        .collect()
        .await;

    let mut out = String::new();
    for result in results {
        let caption = result?;
        out.push_str(&serde_json::to_string(&caption).map_err(|e| CliError::User(e.to_string()))?);
        out.push('\n');
    }
    super::write_output(args.out.as_deref(), &out)
}
