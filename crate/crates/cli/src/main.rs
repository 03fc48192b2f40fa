//! `valign` — pipeline runner for measuring value alignment between
//! humans and language models: prompt generation, model evaluation,
//! survey ingestion, metric computation, and report rendering.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::exit::{CmdOutcome, EXIT_DEGRADED};

#[derive(Parser)]
#[command(name = "valign", version, about = "Human-model value alignment harness")]
struct Cli {
    /// Run-config JSON; command-line flags override its values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and summarize a value catalog.
    Catalog(commands::catalog::CatalogArgs),
    /// Render the prompt batch to JSON Lines.
    Prompts(commands::prompts::PromptsArgs),
    /// Run a prompt batch against an endpoint or the mock backend.
    Eval(commands::eval::EvalArgs),
    /// Compute matrices, rates, and rankings from records and a survey.
    Score(commands::score::ScoreArgs),
    /// Render metric files into the report bundle.
    Report(commands::report::ReportArgs),
    /// Validate a survey export and print the ingest accounting.
    Ingest(commands::ingest::IngestArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    let run_config = match RunConfig::load_optional(cli.config.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    let result = match &cli.command {
        Command::Catalog(args) => commands::catalog::run(args, &run_config),
        Command::Prompts(args) => commands::prompts::run(args, &run_config),
        Command::Eval(args) => commands::eval::run(args, &run_config),
        Command::Score(args) => commands::score::run(args, &run_config),
        Command::Report(args) => commands::report::run(args, &run_config),
        Command::Ingest(args) => commands::ingest::run(args, &run_config),
    };

    match result {
        Ok(CmdOutcome::Clean) => ExitCode::SUCCESS,
        Ok(CmdOutcome::Degraded(reason)) => {
            eprintln!("warning: {reason}");
            ExitCode::from(EXIT_DEGRADED as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
