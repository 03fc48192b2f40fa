//! Report surfaces: heatmaps, shaded rate tables, and ranking charts,
//! each emitted as a self-contained SVG with a CSV companion carrying the
//! exact plotted numbers, plus a hashed manifest of every artifact.

mod heatmap;
mod ranking_chart;
mod rate_table;
pub mod svg;

pub use heatmap::{parse_heatmap_csv, render_heatmap, HeatmapData};
pub use ranking_chart::{parse_ranking_csv, render_ranking, RankingChart};
pub use rate_table::{parse_rate_table_csv, render_rate_table, RateTable};
pub use svg::ColorScale;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{enumerate_contexts, Grouping};
use crate::metrics::{mean_over_rows, COLS, ROWS};
use crate::util::{sha256_hex, write_atomic};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("companion csv: {0}")]
    Companion(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("artifact `{path}` hash mismatch: manifest {expected}, file {actual}")]
    HashMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("missing report input: {0}")]
    MissingInput(PathBuf),
}

/// One rendered artifact: the SVG document and its CSV companion.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub svg: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// File inventory of one report bundle, hashed with SHA-256 and sorted by
/// path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub seed: u64,
    pub artifacts: Vec<ManifestEntry>,
}

/// Lowercases a label into a safe file stem.
pub fn file_stem(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    let mut last_was_sep = true;
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
            last_was_sep = false;
        } else if !last_was_sep {
            out.push('_');
            last_was_sep = true;
        }
    }
    out.trim_end_matches('_').to_string()
}

/// Writes a bundle under `<root>/<run_id>/`: every artifact atomically,
/// then `manifest.json` listing path, size, and SHA-256 of each file.
/// Artifact paths are bundle-relative (e.g. `heatmaps/h_country.svg`).
pub fn write_bundle(
    root: &Path,
    run_id: &str,
    seed: u64,
    files: &[(String, String)],
) -> Result<Manifest, ReportError> {
    let bundle_dir = root.join(run_id);
    let mut entries = Vec::with_capacity(files.len());
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (rel_path, content) in files {
        if !seen.insert(rel_path) {
            return Err(ReportError::Manifest(format!(
                "duplicate artifact path `{rel_path}`"
            )));
        }
        let path = bundle_dir.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_atomic(&path, content.as_bytes())?;
        entries.push(ManifestEntry {
            path: rel_path.clone(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len() as u64,
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        run_id: run_id.to_string(),
        seed,
        artifacts: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&bundle_dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

/// Reads a bundle manifest and verifies that every listed artifact exists
/// with a matching hash.
pub fn verify_manifest(bundle_dir: &Path) -> Result<Manifest, ReportError> {
    let manifest_path = bundle_dir.join("manifest.json");
    let json = std::fs::read_to_string(&manifest_path)
        .map_err(|_| ReportError::MissingInput(manifest_path))?;
    let manifest: Manifest =
        serde_json::from_str(&json).map_err(|e| ReportError::Manifest(e.to_string()))?;
    for entry in &manifest.artifacts {
        let path = bundle_dir.join(&entry.path);
        let bytes = std::fs::read(&path).map_err(|_| ReportError::MissingInput(path.clone()))?;
        let actual = sha256_hex(&bytes);
        if actual != entry.sha256 {
            return Err(ReportError::HashMismatch {
                path: entry.path.clone(),
                expected: entry.sha256.clone(),
                actual,
            });
        }
    }
    Ok(manifest)
}

/// Builds heatmap plot data from a full 28x56 grid, either one row per
/// context or grouped into per-scope mean rows.
pub fn heatmap_from_grid(
    title: &str,
    scale: ColorScale,
    cells: &[Option<f64>],
    col_labels: Vec<String>,
    grouping: Option<Grouping>,
) -> HeatmapData {
    assert_eq!(cells.len(), ROWS * COLS);
    match grouping {
        None => {
            let row_labels = enumerate_contexts()
                .iter()
                .map(|c| format!("{} {}", c.index, c.label()))
                .collect();
            HeatmapData::new(title, scale, row_labels, col_labels, cells.to_vec())
        }
        Some(grouping) => {
            let mut row_labels = Vec::new();
            let mut grouped_cells = Vec::new();
            for scope in grouping.scopes() {
                let rows: Vec<usize> = crate::context::group_contexts(scope)
                    .into_iter()
                    .map(crate::context::Context::row)
                    .collect();
                row_labels.push(scope.label().to_string());
                grouped_cells.extend(mean_over_rows(cells, &rows));
            }
            HeatmapData::new(title, scale, row_labels, col_labels, grouped_cells)
        }
    }
}
