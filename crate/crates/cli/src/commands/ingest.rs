//! `valign ingest` — validates a survey export and prints the ingest
//! accounting without writing any files.

use std::path::PathBuf;

use clap::Args;

use valign_core::ingest::ingest_survey_path;

use crate::config::{resolve_catalog, resolve_survey, RunConfig};
use crate::exit::{CmdOutcome, CmdResult};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Survey CSV export; falls back to the config's `survey`.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: &IngestArgs, config: &RunConfig) -> CmdResult {
    let catalog = resolve_catalog(args.catalog.as_deref(), config)?;
    let survey = resolve_survey(args.survey.as_deref(), config)?;
    let (_, report) = ingest_survey_path(&survey, &catalog)?;

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        println!("rows:               {}", report.total_rows);
        println!("accepted:           {}", report.accepted);
        println!("rejected attention: {}", report.rejected_attention);
        println!("rejected malformed: {}", report.rejected_malformed);
        println!("accepted per (country, topic):");
        for (cell, count) in &report.per_cell_accepted {
            println!("  {cell}: {count}");
        }
        for diagnostic in &report.diagnostics {
            println!("  ! {diagnostic}");
        }
    }

    if report.accepted == 0 {
        return Ok(CmdOutcome::Degraded(
            "no survey rows survived validation and attention filtering".to_string(),
        ));
    }
    Ok(CmdOutcome::Clean)
}
