//! `brandcap` — generate brand-personality-aligned social media captions and
//! evaluate them. One binary: `generate`, `evaluate`, `dataset`, `serve`.

mod commands;
mod config;
mod provider;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::AppConfig;
use provider::ProviderKind;

/// Exit 0: success. Exit 1: user/input error. Exit 2: provider/environment
/// failure. Stable contract for scripting.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Provider(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Provider(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Provider(m) => m,
        }
    }
}

impl From<brandcap::DomainError> for CliError {
    fn from(e: brandcap::DomainError) -> CliError {
        CliError::User(e.to_string())
    }
}

impl From<brandcap::PromptError> for CliError {
    fn from(e: brandcap::PromptError) -> CliError {
        CliError::User(e.to_string())
    }
}

impl From<brandcap::ProviderError> for CliError {
    fn from(e: brandcap::ProviderError) -> CliError {
        match e {
            brandcap::ProviderError::ImageNotFound(_)
            | brandcap::ProviderError::EmptyInput(_)
            | brandcap::ProviderError::InvalidRequest(_) => CliError::User(e.to_string()),
            other => CliError::Provider(other.to_string()),
        }
    }
}

impl From<brandcap::PipelineError> for CliError {
    fn from(e: brandcap::PipelineError) -> CliError {
        match e {
            brandcap::PipelineError::Provider(p) => p.into(),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<brandcap::dataset::DatasetError> for CliError {
    fn from(e: brandcap::dataset::DatasetError) -> CliError {
        match e {
            brandcap::dataset::DatasetError::Provider(p) => p.into(),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::User(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "brandcap",
    version,
    about = "Brand-personality Instagram caption generation and evaluation"
)]
struct Cli {
    /// Flat key=value config file (lowest precedence after defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Provider backend. Defaults to http when PROVIDER_BASE_URL is set,
    /// otherwise the deterministic mock.
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,

    /// Seed for the mock provider and all seeded sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a caption from an image or a one-line description.
    Generate(commands::generate::GenerateArgs),
    /// Evaluate generated captions and emit a metrics report.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Prepare, inspect, sample, and export dataset artifacts.
    Dataset(commands::dataset::DatasetArgs),
    /// Run the HTTP caption service.
    Serve(commands::serve::ServeArgs),
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match AppConfig::load(cli.config.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let seed = cli.seed.unwrap_or(config.seed);
    let result = match cli.command {
        Command::Generate(args) => commands::generate::run(args, &config, cli.provider, seed).await,
        Command::Evaluate(args) => commands::evaluate::run(args, &config, cli.provider, seed).await,
        Command::Dataset(args) => commands::dataset::run(args, &config, cli.provider, seed).await,
        Command::Serve(args) => commands::serve::run(args, &config, cli.provider, seed).await,
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
