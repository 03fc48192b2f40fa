//! `valign report` — renders the metric files into the report bundle:
//! heatmaps, the shaded rate table, and ranking charts, plus the hashed
//! manifest.

use std::path::{Path, PathBuf};

use clap::Args;

use valign_core::metrics::matrix_io::{read_full_grid, read_rankings_csv, read_rates_csv};
use valign_core::report::{
    file_stem, heatmap_from_grid, render_heatmap, render_ranking, render_rate_table, write_bundle,
    ColorScale, RankingChart, RateTable,
};

use crate::config::{resolve_groupings, resolve_out_dir, resolve_seed, RunConfig};
use crate::exit::{CliError, CmdOutcome, CmdResult};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `valign score`.
    #[arg(long)]
    pub metrics_dir: PathBuf,
    /// Bundle root; the bundle lands in `<out-dir>/<run-id>/`.
    /// Falls back to `<config output_dir>/reports`, then `reports`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Bundle name; defaults to `run-<seed>`.
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub groupings: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn require(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Config(format!(
            "missing report input: {}",
            path.display()
        )))
    }
}

fn read_grid(path: PathBuf) -> Result<(Vec<Option<f64>>, Vec<String>), CliError> {
    let file = std::fs::File::open(&require(path.clone())?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let grid = read_full_grid(std::io::BufReader::new(file))?;
    Ok((grid.cells, grid.value_names))
}

/// Seed recorded by `valign score`, when its manifest is present.
fn metrics_seed(metrics_dir: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(metrics_dir.join("metrics_manifest.json")).ok()?;
    let json: serde_json::Value = serde_json::from_str(&text).ok()?;
    json["seed"].as_u64()
}

pub fn run(args: &ReportArgs, config: &RunConfig) -> CmdResult {
    let groupings = resolve_groupings(args.groupings.as_deref(), config)?;
    let out_dir = resolve_out_dir(args.out_dir.as_deref(), config, "reports", Some("reports"))?;
    let seed = args
        .seed
        .or_else(|| metrics_seed(&args.metrics_dir))
        .unwrap_or_else(|| resolve_seed(None, config));
    let run_id = args.run_id.clone().unwrap_or_else(|| format!("run-{seed}"));

    let (human_cells, value_names) = read_grid(args.metrics_dir.join("H.csv"))?;
    let (model_cells, _) = read_grid(args.metrics_dir.join("L.csv"))?;
    let (distance_cells, _) = read_grid(args.metrics_dir.join("D.csv"))?;

    let mut files: Vec<(String, String)> = Vec::new();
    let push_artifact = |files: &mut Vec<(String, String)>, dir: &str, stem: String, artifact: valign_core::report::Artifact| {
        files.push((format!("{dir}/{stem}.svg"), artifact.svg));
        files.push((format!("{dir}/{stem}.csv"), artifact.csv));
    };

    for grouping in &groupings {
        let surfaces: [(&str, &Vec<Option<f64>>, ColorScale, &str); 3] = [
            ("h", &human_cells, ColorScale::Diverging, "Human responses"),
            ("l", &model_cells, ColorScale::Diverging, "Model responses"),
            ("d", &distance_cells, ColorScale::Sequential, "Alignment distance"),
        ];
        for (stem, cells, scale, title) in surfaces {
            let data = heatmap_from_grid(
                &format!("{title} by {}", grouping.label()),
                scale,
                cells,
                value_names.clone(),
                Some(*grouping),
            );
            push_artifact(
                &mut files,
                "heatmaps",
                format!("{stem}_{}", grouping.label()),
                render_heatmap(&data),
            );
        }

        let rates_path = require(args.metrics_dir.join(format!("rates_{}.csv", grouping.label())))?;
        let rates_file = std::fs::File::open(&rates_path)
            .map_err(|e| CliError::Config(format!("{}: {e}", rates_path.display())))?;
        let (scope_labels, rate_rows) = read_rates_csv(std::io::BufReader::new(rates_file))?;
        let table = RateTable::new(
            format!("Alignment rates (F1) by {}", grouping.label()),
            scope_labels,
            rate_rows,
        );
        push_artifact(
            &mut files,
            "tables",
            format!("rates_{}", grouping.label()),
            render_rate_table(&table),
        );

        let rankings_path =
            require(args.metrics_dir.join(format!("rankings_{}.csv", grouping.label())))?;
        let rankings_file = std::fs::File::open(&rankings_path)
            .map_err(|e| CliError::Config(format!("{}: {e}", rankings_path.display())))?;
        let ranked_lists = read_rankings_csv(std::io::BufReader::new(rankings_file))?;
        if ranked_lists.is_empty() {
            return Err(CliError::Config(format!(
                "missing report input: {} has no ranking rows",
                rankings_path.display()
            )));
        }
        for list in &ranked_lists {
            let chart = RankingChart::new(
                format!("Alignment distance ranking: {}", list.scope),
                list.clone(),
                None,
            );
            push_artifact(
                &mut files,
                "rankings",
                format!("{}_{}", grouping.label(), file_stem(&list.scope)),
                render_ranking(&chart),
            );
        }

        // paired comparison of the most and least distant scopes
        if ranked_lists.len() >= 2 {
            let scope_mean = |list: &valign_core::metrics::RankedList| {
                let present: Vec<f64> = list.items.iter().filter_map(|i| i.distance).collect();
                (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
            };
            let mut order: Vec<usize> = (0..ranked_lists.len()).collect();
            order.sort_by(|&a, &b| {
                let (ma, mb) = (scope_mean(&ranked_lists[a]), scope_mean(&ranked_lists[b]));
                mb.partial_cmp(&ma)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let most = &ranked_lists[order[0]];
            let least = &ranked_lists[*order.last().unwrap()];
            let chart = RankingChart::new(
                format!(
                    "Alignment distance ranking: {} vs {}",
                    most.scope, least.scope
                ),
                most.clone(),
                Some(least.clone()),
            );
            push_artifact(
                &mut files,
                "rankings",
                format!("comparison_{}", grouping.label()),
                render_ranking(&chart),
            );
        }
    }

    let manifest = write_bundle(&out_dir, &run_id, seed, &files)?;
    println!(
        "report bundle `{}` written to {}: {} artifacts",
        run_id,
        out_dir.join(&run_id).display(),
        manifest.artifacts.len()
    );
    Ok(CmdOutcome::Clean)
}
