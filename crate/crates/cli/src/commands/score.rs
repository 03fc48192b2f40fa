//! `valign score` — turns records and a survey export into the L, H, and
//! D matrices, per-grouping rates, and rankings.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use valign_core::catalog::ValueItem;
use valign_core::gateway::read_score_jsonl_path;
use valign_core::ingest::{aggregate_human_matrix, ingest_survey_path, IngestReport};
use valign_core::metrics::matrix_io::{
    write_distance_matrix, write_grouped_grid, write_matrix_counts, write_matrix_irrelevance,
    write_rankings_csv, write_rates_csv, write_response_matrix,
};
use valign_core::metrics::{
    aggregate_prompt_scores, alignment_distance, alignment_rate, alignment_ranking, binarize,
    grouped_distance, rank_pairs, scope_mean_distance, scope_rows, RankedList,
};
use valign_core::util::{fmt6, write_atomic};

use crate::config::{
    resolve_catalog, resolve_groupings, resolve_out_dir, resolve_seed, resolve_survey, RunConfig,
};
use crate::exit::{CliError, CmdOutcome, CmdResult};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Score records JSONL from `valign eval`.
    #[arg(long)]
    pub records: PathBuf,
    /// Survey CSV export; falls back to the config's `survey`.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    /// Directory for the metric files; falls back to
    /// `<config output_dir>/metrics`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Minimum numeric variants for a valid model cell.
    #[arg(long)]
    pub min_count: Option<u32>,
    /// Also report the macro average of both one-vs-rest F1 scores.
    #[arg(long)]
    pub macro_f1: bool,
    /// Comma-separated groupings: country, topic.
    #[arg(long)]
    pub groupings: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct MetricsManifest<'a> {
    seed: u64,
    model_label: String,
    records: String,
    survey: String,
    min_count: u32,
    macro_f1: bool,
    groupings: Vec<&'static str>,
    ingest: &'a IngestReport,
    model_cells_present: usize,
    human_cells_present: usize,
}

/// Model label for the rate rows: the eval manifest's model id when one
/// sits next to the records file.
fn model_label(records: &Path) -> String {
    let manifest = crate::commands::eval::manifest_path(records);
    std::fs::read_to_string(manifest)
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|json| json["model_id"].as_str().map(str::to_string))
        .unwrap_or_else(|| "model".to_string())
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(&dir.join(name), bytes)?;
    Ok(())
}

pub fn run(args: &ScoreArgs, config: &RunConfig) -> CmdResult {
    let catalog: Vec<ValueItem> = resolve_catalog(args.catalog.as_deref(), config)?;
    let groupings = resolve_groupings(args.groupings.as_deref(), config)?;
    let min_count = args.min_count.or(config.min_count).unwrap_or(1);
    let macro_f1 = args.macro_f1 || config.macro_f1.unwrap_or(false);
    let seed = resolve_seed(args.seed, config);
    let survey = resolve_survey(args.survey.as_deref(), config)?;
    let out_dir = resolve_out_dir(args.out_dir.as_deref(), config, "metrics", None)?;

    let records = read_score_jsonl_path(&args.records)
        .map_err(|e| CliError::Config(format!("records {}: {e}", args.records.display())))?;
    let model = aggregate_prompt_scores(&records, min_count)?;
    let (kept, ingest_report) = ingest_survey_path(&survey, &catalog)?;
    for diagnostic in &ingest_report.diagnostics {
        log::warn!("survey: {diagnostic}");
    }
    let human = aggregate_human_matrix(&kept);
    for row in human.empty_rows() {
        log::warn!("survey covers no participants for context {}", row + 1);
    }
    let distance = alignment_distance(&model, &human);
    let model_binary = binarize(&model);
    let human_binary = binarize(&human);

    std::fs::create_dir_all(&out_dir)?;
    let dir = out_dir.as_path();

    let mut buf = Vec::new();
    write_response_matrix(&mut buf, &model, &catalog)?;
    write_out(dir, "L.csv", &buf)?;
    buf = Vec::new();
    write_response_matrix(&mut buf, &human, &catalog)?;
    write_out(dir, "H.csv", &buf)?;
    buf = Vec::new();
    write_matrix_counts(&mut buf, &human, &catalog)?;
    write_out(dir, "H_counts.csv", &buf)?;
    buf = Vec::new();
    write_matrix_irrelevance(&mut buf, &human, &catalog)?;
    write_out(dir, "H_irrelevance.csv", &buf)?;
    buf = Vec::new();
    write_distance_matrix(&mut buf, &distance, &catalog)?;
    write_out(dir, "D.csv", &buf)?;

    let label = model_label(&args.records);
    let mut any_rate_defined = false;
    let mut scope_ranking_rows = String::from("grouping,rank,scope,mean_distance\n");
    for grouping in &groupings {
        let mut labels = Vec::new();
        let mut rates = Vec::new();
        let mut macros = Vec::new();
        let mut grouped_rows = Vec::new();
        let mut rankings: Vec<RankedList> = Vec::new();
        let mut scope_means: Vec<(u8, Option<f64>)> = Vec::new();
        let mut scope_names = std::collections::BTreeMap::new();
        for (i, scope) in grouping.scopes().into_iter().enumerate() {
            let rows = scope_rows(Some(scope));
            let rate = alignment_rate(&model_binary, &human_binary, &rows);
            any_rate_defined |= rate.f1.is_some();
            labels.push(scope.label().to_string());
            rates.push(rate.f1);
            macros.push(rate.macro_f1);
            let grouped = grouped_distance(&distance, scope);
            rankings.push(alignment_ranking(scope.label(), &grouped, &catalog));
            grouped_rows.push((scope.label().to_string(), grouped));
            scope_means.push((i as u8 + 1, scope_mean_distance(&distance, scope)));
            scope_names.insert(i as u8 + 1, scope.label().to_string());
        }

        buf = Vec::new();
        write_rates_csv(
            &mut buf,
            &labels,
            &[(label.clone(), rates)],
            macro_f1.then_some(std::slice::from_ref(&macros)).map(|m| m),
        )?;
        write_out(dir, &format!("rates_{}.csv", grouping.label()), &buf)?;

        buf = Vec::new();
        write_grouped_grid(&mut buf, &grouped_rows, &catalog)?;
        write_out(dir, &format!("d_{}.csv", grouping.label()), &buf)?;

        buf = Vec::new();
        write_rankings_csv(&mut buf, &rankings)?;
        write_out(dir, &format!("rankings_{}.csv", grouping.label()), &buf)?;

        // scopes themselves ranked by mean distance
        let ranked_scopes = rank_pairs(grouping.label(), scope_means, &scope_names);
        for item in &ranked_scopes.items {
            scope_ranking_rows.push_str(&format!(
                "{},{},{},{}\n",
                grouping.label(),
                item.rank.map_or_else(String::new, |r| r.to_string()),
                item.name,
                item.distance.map_or_else(|| "NA".to_string(), fmt6)
            ));
        }
    }
    write_out(dir, "scope_ranking.csv", scope_ranking_rows.as_bytes())?;

    let manifest = MetricsManifest {
        seed,
        model_label: label,
        records: args.records.display().to_string(),
        survey: survey.display().to_string(),
        min_count,
        macro_f1,
        groupings: groupings.iter().map(|g| g.label()).collect(),
        ingest: &ingest_report,
        model_cells_present: model.present_cells(),
        human_cells_present: human.present_cells(),
    };
    write_out(
        dir,
        "metrics_manifest.json",
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;

    println!(
        "metrics written to {}: survey accepted {}/{} (attention {}, malformed {}), \
         model cells {}, human cells {}",
        dir.display(),
        ingest_report.accepted,
        ingest_report.total_rows,
        ingest_report.rejected_attention,
        ingest_report.rejected_malformed,
        model.present_cells(),
        human.present_cells(),
    );

    if human.present_cells() == 0 {
        return Ok(CmdOutcome::Degraded(
            "human matrix is entirely missing (no accepted survey responses)".to_string(),
        ));
    }
    if !any_rate_defined {
        return Ok(CmdOutcome::Degraded(
            "every alignment rate is undefined (no joint cells with positive evidence)".to_string(),
        ));
    }
    Ok(CmdOutcome::Clean)
}
