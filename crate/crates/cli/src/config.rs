//! The versioned run-config file. Every field is optional; command-line
//! flags override file values, and built-in defaults cover the rest.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use valign_core::catalog::{load_catalog, default_catalog, OptionScheme, ValueItem};
use valign_core::context::{Grouping, VignetteSet};
use valign_core::gateway::ModelConfig;

use crate::exit::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub version: Option<u32>,
    pub catalog: Option<PathBuf>,
    pub vignettes: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    /// "five_point" (default) or "one_to_four".
    pub scale: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub groupings: Option<Vec<String>>,
    pub macro_f1: Option<bool>,
    pub min_count: Option<u32>,
    pub model: Option<ModelConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        match config.version {
            Some(CONFIG_VERSION) => Ok(config),
            Some(other) => Err(CliError::Config(format!(
                "config {}: unsupported schema version {other} (expected {CONFIG_VERSION})",
                path.display()
            ))),
            None => Err(CliError::Config(format!(
                "config {}: missing `version` field",
                path.display()
            ))),
        }
    }

    pub fn load_optional(path: Option<&Path>) -> Result<RunConfig, CliError> {
        match path {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }
}

/// Loads the catalog from a flag path, then the config path, then the
/// bundled default.
pub fn resolve_catalog(
    flag: Option<&Path>,
    config: &RunConfig,
) -> Result<Vec<ValueItem>, CliError> {
    match flag.or(config.catalog.as_deref()) {
        Some(path) => Ok(load_catalog(path)?),
        None => Ok(default_catalog().to_vec()),
    }
}

pub fn resolve_vignettes(
    flag: Option<&Path>,
    config: &RunConfig,
) -> Result<VignetteSet, CliError> {
    match flag.or(config.vignettes.as_deref()) {
        Some(path) => Ok(VignetteSet::load(path)?),
        None => Ok(VignetteSet::bundled().clone()),
    }
}

pub fn resolve_scheme(flag: Option<&str>, config: &RunConfig) -> Result<OptionScheme, CliError> {
    let name = flag
        .or(config.scale.as_deref())
        .unwrap_or("five_point");
    OptionScheme::by_name(name)
        .ok_or_else(|| CliError::Config(format!("unknown scale `{name}` (five_point, one_to_four)")))
}

pub fn resolve_groupings(
    flag: Option<&str>,
    config: &RunConfig,
) -> Result<Vec<Grouping>, CliError> {
    let names: Vec<String> = match flag {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => config
            .groupings
            .clone()
            .unwrap_or_else(|| vec!["country".to_string(), "topic".to_string()]),
    };
    let mut groupings = Vec::new();
    for name in names {
        let grouping = Grouping::parse(&name)
            .map_err(|_| CliError::Config(format!("unknown grouping `{name}` (country, topic)")))?;
        if !groupings.contains(&grouping) {
            groupings.push(grouping);
        }
    }
    if groupings.is_empty() {
        return Err(CliError::Config("no groupings selected".to_string()));
    }
    Ok(groupings)
}

pub fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> u64 {
    flag.or(config.seed).unwrap_or(0)
}

pub fn resolve_survey(flag: Option<&Path>, config: &RunConfig) -> Result<PathBuf, CliError> {
    flag.map(Path::to_path_buf)
        .or_else(|| config.survey.clone())
        .ok_or_else(|| {
            CliError::Config("no survey file: pass --survey or set `survey` in the config".to_string())
        })
}

/// Output directory: the flag, else `<config.output_dir>/<subdir>`, else
/// `<fallback>` when one is allowed.
pub fn resolve_out_dir(
    flag: Option<&Path>,
    config: &RunConfig,
    subdir: &str,
    fallback: Option<&str>,
) -> Result<PathBuf, CliError> {
    if let Some(dir) = flag {
        return Ok(dir.to_path_buf());
    }
    if let Some(base) = &config.output_dir {
        return Ok(base.join(subdir));
    }
    fallback.map(PathBuf::from).ok_or_else(|| {
        CliError::Config("no output directory: pass --out-dir or set `output_dir` in the config".to_string())
    })
}
