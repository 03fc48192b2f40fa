//! `valign catalog` — loads and validates a value catalog and prints a
//! summary.

use std::path::PathBuf;

use clap::Args;

use crate::config::{resolve_catalog, RunConfig};
use crate::exit::{CmdOutcome, CmdResult};

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Catalog CSV; defaults to the bundled 56-value catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Print every value with its definition.
    #[arg(long)]
    pub list: bool,
}

pub fn run(args: &CatalogArgs, config: &RunConfig) -> CmdResult {
    let catalog = resolve_catalog(args.catalog.as_deref(), config)?;
    println!(
        "catalog OK: {} values, ids 1..={}, names unique",
        catalog.len(),
        catalog.len()
    );
    let typed = catalog
        .iter()
        .filter(|v| v.motivational_type.is_some())
        .count();
    if typed > 0 {
        println!("motivational types present on {typed} values");
    }
    if args.list {
        for value in &catalog {
            println!("{:>2}  {}: {}", value.id, value.name, value.definition);
        }
    }
    Ok(CmdOutcome::Clean)
}
