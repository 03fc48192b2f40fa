//! `valign prompts` — renders the prompt batch to JSON Lines plus a
//! per-context summary file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use valign_core::context::{enumerate_contexts, group_contexts, Scope};
use valign_core::prompt::{write_prompt_jsonl, PromptEngine};
use valign_core::util::write_atomic;

use crate::config::{resolve_catalog, resolve_scheme, resolve_seed, resolve_vignettes, RunConfig};
use crate::exit::{CmdOutcome, CmdResult};

#[derive(Debug, Args)]
pub struct PromptsArgs {
    /// Output JSONL path for the batch.
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to one country or topic (e.g. "Healthcare").
    #[arg(long)]
    pub contexts: Option<String>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub vignettes: Option<PathBuf>,
    /// Option scheme: five_point (default) or one_to_four.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct PromptSummary {
    seed: u64,
    scale: String,
    total_prompts: usize,
    contexts: usize,
    values: usize,
    variants_per_cell: usize,
    prompts_per_context: BTreeMap<u8, usize>,
}

pub fn run(args: &PromptsArgs, config: &RunConfig) -> CmdResult {
    let catalog = resolve_catalog(args.catalog.as_deref(), config)?;
    let vignettes = resolve_vignettes(args.vignettes.as_deref(), config)?;
    let scheme = resolve_scheme(args.scale.as_deref(), config)?;
    let scale_name = args
        .scale
        .clone()
        .or_else(|| config.scale.clone())
        .unwrap_or_else(|| "five_point".to_string());

    let contexts = match &args.contexts {
        Some(selector) => group_contexts(Scope::parse(selector)?),
        None => enumerate_contexts(),
    };

    let engine = PromptEngine::new(vignettes, scheme);
    let batch = engine.generate_prompt_batch(&contexts, &catalog);

    let mut jsonl = Vec::new();
    write_prompt_jsonl(&mut jsonl, &batch).map_err(|e| crate::exit::CliError::Config(e.to_string()))?;
    write_atomic(&args.out, &jsonl)?;

    let mut prompts_per_context = BTreeMap::new();
    for prompt in &batch {
        *prompts_per_context.entry(prompt.context.index).or_insert(0) += 1;
    }
    let summary = PromptSummary {
        seed: resolve_seed(args.seed, config),
        scale: scale_name,
        total_prompts: batch.len(),
        contexts: contexts.len(),
        values: catalog.len(),
        variants_per_cell: valign_core::prompt::VARIANT_COUNT,
        prompts_per_context,
    };
    let summary_path = summary_path(&args.out);
    write_atomic(
        &summary_path,
        serde_json::to_string_pretty(&summary)
            .expect("summary serializes")
            .as_bytes(),
    )?;

    println!(
        "wrote {} prompts for {} contexts x {} values x {} variants to {}",
        summary.total_prompts,
        summary.contexts,
        summary.values,
        summary.variants_per_cell,
        args.out.display()
    );
    println!("summary: {}", summary_path.display());
    Ok(CmdOutcome::Clean)
}

pub fn summary_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    out.with_file_name(name)
}
