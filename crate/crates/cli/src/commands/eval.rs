//! `valign eval` — runs a prompt batch against an endpoint or the mock
//! backend, with incremental checkpointing and an optional stability
//! probe.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;
use serde::Serialize;

use valign_core::gateway::{
    run_evaluation, run_stability, CompletionBackend, EvalOptions, HttpBackend, MockBackend,
    ModelConfig,
};
use valign_core::prompt::read_prompt_jsonl;
use valign_core::util::{fmt6, write_atomic};

use crate::config::{resolve_seed, RunConfig};
use crate::exit::{CliError, CmdOutcome, CmdResult};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prompt batch JSONL produced by `valign prompts`.
    #[arg(long)]
    pub prompts: PathBuf,
    /// Records file (JSON Lines, append-only); doubles as the checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Model config JSON for a live endpoint.
    #[arg(long, conflicts_with = "mock")]
    pub model_config: Option<PathBuf>,
    /// Use the deterministic mock backend instead of an endpoint.
    #[arg(long)]
    pub mock: bool,
    /// Seed for the mock backend.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reuse records already present in the checkpoint.
    #[arg(long)]
    pub resume: bool,
    /// Re-query each prompt N times and report per-cell variance.
    #[arg(long, value_name = "N")]
    pub stability: Option<Option<u32>>,
    /// Max in-flight requests, overriding the model config.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Serialize)]
struct RunManifest {
    model_id: String,
    temperature: f64,
    backend: &'static str,
    seed: u64,
    started_unix: u64,
    finished_unix: u64,
    prompts: usize,
    requests_issued: u64,
    reused_from_checkpoint: usize,
    missing: usize,
    irrelevant: usize,
    degraded: bool,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load_model_config(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("model config {}: {e}", path.display())))?;
    let config: ModelConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("model config {}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn run(args: &EvalArgs, config: &RunConfig) -> CmdResult {
    let file = std::fs::File::open(&args.prompts)
        .map_err(|e| CliError::Config(format!("prompts {}: {e}", args.prompts.display())))?;
    let batch = read_prompt_jsonl(std::io::BufReader::new(file))?;

    let seed = resolve_seed(args.seed, config);
    let (backend, mut model_config, backend_name): (Box<dyn CompletionBackend>, ModelConfig, _) =
        if args.mock {
            (Box::new(MockBackend::new(seed)), ModelConfig::mock(), "mock")
        } else {
            let path = args
                .model_config
                .as_deref()
                .or_else(|| config.model.as_ref().map(|_| Path::new("")))
                .ok_or_else(|| {
                    CliError::Config(
                        "a live run needs --model-config (or `model` in the config file); \
                         pass --mock for the deterministic backend"
                            .to_string(),
                    )
                })?;
            let model_config = if path.as_os_str().is_empty() {
                let inline = config.model.clone().expect("model presence checked");
                inline.validate()?;
                inline
            } else {
                load_model_config(path)?
            };
            // credential resolution happens here, before any request
            let backend = HttpBackend::from_env(&model_config)?;
            (Box::new(backend), model_config, "http")
        };
    if let Some(parallelism) = args.parallelism {
        model_config.parallelism = parallelism;
    }

    let started_unix = unix_now();
    let options = EvalOptions {
        checkpoint: Some(args.out.clone()),
        resume: args.resume,
    };
    let summary = run_evaluation(backend.as_ref(), &model_config, &batch, &options)?;

    let manifest = RunManifest {
        model_id: model_config.model_id.clone(),
        temperature: model_config.temperature,
        backend: backend_name,
        seed,
        started_unix,
        finished_unix: unix_now(),
        prompts: batch.len(),
        requests_issued: summary.requests_issued,
        reused_from_checkpoint: summary.reused_from_checkpoint,
        missing: summary.missing,
        irrelevant: summary.irrelevant,
        degraded: summary.degraded,
    };
    let manifest_path = manifest_path(&args.out);
    write_atomic(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    println!(
        "{} records ({} issued, {} reused, {} missing) -> {}",
        summary.records.len(),
        summary.requests_issued,
        summary.reused_from_checkpoint,
        summary.missing,
        args.out.display()
    );

    if let Some(replicates) = args.stability {
        let replicates = replicates.unwrap_or(10);
        let report = run_stability(backend.as_ref(), &model_config, &batch, replicates)?;
        let stability_path = stability_path(&args.out);
        write_atomic(&stability_path, stability_csv(&report).as_bytes())?;
        println!(
            "stability probe ({} replicates): mean variance {}, stable fraction {}",
            replicates,
            report.mean_variance.map_or_else(|| "n/a".to_string(), fmt6),
            report
                .stable_fraction
                .map_or_else(|| "n/a".to_string(), fmt6),
        );
        println!("stability report: {}", stability_path.display());
    }

    if summary.degraded {
        return Ok(CmdOutcome::Degraded(format!(
            "{} of {} records missing (>50%)",
            summary.missing,
            summary.records.len()
        )));
    }
    Ok(CmdOutcome::Clean)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn stability_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".stability.csv");
    out.with_file_name(name)
}

fn stability_csv(report: &valign_core::gateway::StabilityReport) -> String {
    let mut out = String::from("context_index,value_id,variant_id,samples,numeric,mean,variance\n");
    for cell in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.context_index,
            cell.value_id,
            cell.variant_id,
            cell.samples,
            cell.numeric,
            cell.mean.map_or_else(|| "NA".to_string(), fmt6),
            cell.variance.map_or_else(|| "NA".to_string(), fmt6),
        ));
    }
    out
}
