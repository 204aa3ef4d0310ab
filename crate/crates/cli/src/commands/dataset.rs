//! `brandcap dataset`: prepare (clean + split), stats, sample, build-pairs,
//! and import.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use brandcap::dataset::{
    assign_splits, build_training_pairs, clean, import_export_file, read_descriptions,
    read_post_records, sample_test, stats, write_post_records, HeuristicEntityProvider, SplitSet,
    DEFAULT_VAL_FRACTION,
};
use brandcap::domain::{BrandMap, Variant};

use crate::config::AppConfig;
use crate::provider::{build_client, ProviderKind};
use crate::CliError;

#[derive(Args)]
pub struct DatasetArgs {
    #[command(subcommand)]
    action: DatasetAction,
}

#[derive(Subcommand)]
enum DatasetAction {
    /// Clean records and split them into train/validation/test files.
    Prepare {
        /// Input JSONL of post records.
        #[arg(long)]
        input: PathBuf,
        /// Directory receiving train.jsonl, validation.jsonl, test.jsonl,
        /// dropped.jsonl, and stats.txt.
        #[arg(long)]
        out_dir: PathBuf,
        /// Share of non-test records routed to validation.
        #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
        val_fraction: f64,
    },
    /// Print the per-personality split statistics table.
    Stats {
        /// Directory produced by `dataset prepare`.
        #[arg(long)]
        dir: PathBuf,
        /// Optional path for the table (printed to stdout regardless).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a seeded per-personality sample from the test split.
    Sample {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        per_personality: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build instruction/target fine-tuning pairs from cleaned records.
    BuildPairs {
        /// Input JSONL of cleaned post records (usually train.jsonl).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "selective")]
        variant: String,
        /// JSONL of {"id", "description"} rows; records found here skip the
        /// captioning provider.
        #[arg(long)]
        descriptions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a raw Instagram export into the post-record schema.
    Import {
        /// JSONL of {shortcode, caption, display_url, taken_at,
        /// owner_username} rows.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_splits(dir: &Path) -> Result<SplitSet, CliError> {
    let map = BrandMap::bundled();
    let read = |name: &str| -> Result<Vec<brandcap::PostRecord>, CliError> {
        let path = dir.join(name);
        if path.exists() {
            Ok(read_post_records(&path, map)?)
        } else {
            Ok(Vec::new())
        }
    };
    Ok(SplitSet {
        train: read("train.jsonl")?,
        validation: read("validation.jsonl")?,
        test: read("test.jsonl")?,
    })
}

pub async fn run(
    args: DatasetArgs,
    config: &AppConfig,
    kind: Option<ProviderKind>,
    seed: u64,
) -> Result<(), CliError> {
    match args.action {
        DatasetAction::Prepare {
            input,
            out_dir,
            val_fraction,
        } => {
            let records = read_post_records(&input, BrandMap::bundled())?;
            let report = clean(records);
            let split =
                assign_splits(report.kept.clone(), BrandMap::bundled(), val_fraction, seed)?;
            std::fs::create_dir_all(&out_dir)?;
            write_post_records(&out_dir.join("train.jsonl"), &split.train)?;
            write_post_records(&out_dir.join("validation.jsonl"), &split.validation)?;
            write_post_records(&out_dir.join("test.jsonl"), &split.test)?;
            let mut dropped = String::new();
            for (record, reason) in &report.dropped {
                dropped.push_str(&format!(
                    "{}\n",
                    serde_json::json!({"id": record.id, "reason": reason.to_string()})
                ));
            }
            std::fs::write(out_dir.join("dropped.jsonl"), dropped)?;
            let table = stats(&split).to_text();
            std::fs::write(out_dir.join("stats.txt"), &table)?;
            println!(
                "kept {} records, dropped {} ({} emoji-only, {} too short, {} not English)",
                report.kept.len(),
                report.dropped.len(),
                report
                    .dropped
                    .iter()
                    .filter(|(_, r)| matches!(r, brandcap::dataset::DropReason::EmojiOnly))
                    .count(),
                report
                    .dropped
                    .iter()
                    .filter(|(_, r)| matches!(r, brandcap::dataset::DropReason::TooShort))
                    .count(),
                report
                    .dropped
                    .iter()
                    .filter(|(_, r)| matches!(r, brandcap::dataset::DropReason::NotEnglish))
                    .count(),
            );
            print!("{table}");
            Ok(())
        }
        DatasetAction::Stats { dir, out } => {
            let table = stats(&load_splits(&dir)?).to_text();
            if let Some(path) = &out {
                super::write_output(Some(path), &table)?;
            }
            print!("{table}");
            Ok(())
        }
        DatasetAction::Sample {
            dir,
            per_personality,
            out,
        } => {
            let split = load_splits(&dir)?;
            let sample = sample_test(&split, per_personality, seed)?;
            let mut lines = String::new();
            for record in &sample {
                lines.push_str(
                    &serde_json::to_string(&record.to_raw())
                        .map_err(|e| CliError::User(e.to_string()))?,
                );
                lines.push('\n');
            }
            super::write_output(out.as_deref(), &lines)?;
            eprintln!("sampled {} records", sample.len());
            Ok(())
        }
        DatasetAction::BuildPairs {
            input,
            variant,
            descriptions,
            out,
        } => {
            let variant: Variant = variant.parse().map_err(CliError::User)?;
            let records = read_post_records(&input, BrandMap::bundled())?;
            let stored = match &descriptions {
                Some(path) => Some(read_descriptions(path)?),
                None => None,
            };
            let client = build_client(config, kind, seed)?;
            let pairs = build_training_pairs(
                &client,
                &config.caption_model,
                &records,
                variant,
                &HeuristicEntityProvider,
                stored.as_ref(),
            )
            .await?;
            let mut lines = String::new();
            for pair in &pairs {
                lines.push_str(
                    &serde_json::to_string(pair).map_err(|e| CliError::User(e.to_string()))?,
                );
                lines.push('\n');
            }
            super::write_output(out.as_deref(), &lines)?;
            eprintln!("built {} training pairs", pairs.len());
            Ok(())
        }
        DatasetAction::Import { input, out } => {
            let raw = import_export_file(&input)?;
            let mut lines = String::new();
            for record in &raw {
                lines.push_str(
                    &serde_json::to_string(record).map_err(|e| CliError::User(e.to_string()))?,
                );
                lines.push('\n');
            }
            super::write_output(out.as_deref(), &lines)?;
            eprintln!("imported {} records", raw.len());
            Ok(())
        }
    }
}
