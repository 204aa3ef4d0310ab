//! `brandcap evaluate`: compute the metrics report over generated captions.

use std::io::BufRead;
use std::path::PathBuf;

use clap::Args;

use brandcap::dataset::read_post_records;
use brandcap::domain::{BrandMap, GeneratedCaption};
use brandcap::metrics::{evaluate_run, EvalItem, EvalOptions};
use brandcap::providers::ChatParams;

use crate::config::AppConfig;
use crate::provider::{build_client, ProviderKind};
use crate::CliError;

#[derive(Args)]
pub struct EvaluateArgs {
    /// JSONL of generated captions (one GeneratedCaption per line).
    #[arg(long)]
    inputs: PathBuf,

    /// JSONL of post records paired 1:1 by line with the inputs; supplies
    /// images, ground-truth captions, and actual personalities.
    #[arg(long)]
    dataset: Option<PathBuf>,

    /// Skip image/caption relevance scoring.
    #[arg(long)]
    skip_clipscore: bool,

    /// Skip the personality judge.
    #[arg(long)]
    skip_geval: bool,

    /// Judge completions per caption.
    #[arg(long, default_value_t = 10)]
    judge_n: u32,

    /// Label for the report's Model column.
    #[arg(long)]
    model_label: Option<String>,

    /// Items evaluated concurrently.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,

    /// Report path; JSON is written here, the text table next to it as
    /// `<out>.txt`, and also printed to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub async fn run(
    args: EvaluateArgs,
    config: &AppConfig,
    kind: Option<ProviderKind>,
    seed: u64,
) -> Result<(), CliError> {
    let client = build_client(config, kind, seed)?;

    let file = std::fs::File::open(&args.inputs)
        .map_err(|e| CliError::User(format!("{}: {e}", args.inputs.display())))?;
    let mut captions: Vec<GeneratedCaption> = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        captions
            .push(serde_json::from_str(&line).map_err(|e| {
                CliError::User(format!("{}:{}: {e}", args.inputs.display(), i + 1))
            })?);
    }

    let records = match &args.dataset {
        Some(path) => read_post_records(path, BrandMap::bundled())?,
        None => Vec::new(),
    };

    let items: Vec<EvalItem> = captions
        .into_iter()
        .enumerate()
        .map(|(i, caption)| EvalItem {
            record: records.get(i).cloned(),
            caption,
            ground_truth: None,
        })
        .collect();

    let label = args.model_label.clone().unwrap_or_else(|| {
        items
            .first()
            .map(|item| item.caption.request.model_id.clone())
            .filter(|m| !m.is_empty())
            .unwrap_or_else(|| "run".to_string())
    });
    let mut opts = EvalOptions::new(label);
    opts.skip_clipscore = args.skip_clipscore;
    opts.skip_geval = args.skip_geval;
    opts.judge_n = args.judge_n;
    opts.judge_params = ChatParams::new(config.chat_model.clone());
    opts.embed_text_model = config.embed_text_model.clone();
    opts.embed_image_model = config.embed_image_model.clone();
    opts.concurrency = args.concurrency;

    let report = evaluate_run(&client, &items, &opts).await;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }

    let mut json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::User(e.to_string()))?;
    json.push('\n');
    let table = report.to_table();
    match &args.out {
        Some(path) => {
            super::write_output(Some(path), &json)?;
            let table_path = path.with_extension("txt");
            super::write_output(Some(&table_path), &table)?;
            print!("{table}");
        }
        None => {
            print!("{json}{table}");
        }
    }
    Ok(())
}
