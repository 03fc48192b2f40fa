//! The model gateway: sends prompt batches to a completion backend with
//! retry, bounded concurrency, and incremental checkpointing, and parses
//! the structured answers into score records.

mod backend;
mod parse;

pub use backend::{BackendError, CompletionBackend, HttpBackend, MockBackend};
pub use parse::parse_score;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::RawScore;
use crate::prompt::PromptRecord;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("failed to build HTTP client: {0}")]
    Client(String),
    #[error("records file line {line}: {message}")]
    Records { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Connection settings for one model endpoint. The credential itself is
/// looked up in the environment at runtime and never stored here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub endpoint_url: String,
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_credential_ref")]
    pub credential_ref: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retry_base_delay_ms")]
    pub retry_base_delay_ms: u64,
}

fn default_temperature() -> f64 {
    0.2
}
fn default_max_retries() -> u32 {
    3
}
fn default_parallelism() -> usize {
    4
}
fn default_credential_ref() -> String {
    "VALIGN_API_KEY".to_string()
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_retry_base_delay_ms() -> u64 {
    500
}

impl ModelConfig {
    /// Placeholder config for mock runs; no endpoint is contacted.
    pub fn mock() -> ModelConfig {
        ModelConfig {
            endpoint_url: "mock://local".to_string(),
            model_id: "mock".to_string(),
            temperature: default_temperature(),
            max_retries: 0,
            parallelism: default_parallelism(),
            credential_ref: default_credential_ref(),
            timeout_secs: default_timeout_secs(),
            retry_base_delay_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(GatewayError::InvalidConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.parallelism < 1 {
            return Err(GatewayError::InvalidConfig(
                "parallelism must be >= 1".to_string(),
            ));
        }
        if self.endpoint_url.trim().is_empty() || self.model_id.trim().is_empty() {
            return Err(GatewayError::InvalidConfig(
                "endpoint_url and model_id must be non-empty".to_string(),
            ));
        }
        Ok(())
    }
}

/// Outcome of parsing one completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScoreOutcomeRepr", into = "ScoreOutcomeRepr")]
pub enum ScoreOutcome {
    Numeric(RawScore),
    Irrelevant,
    /// Parsing or transport failed after retries.
    Missing,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScoreOutcomeRepr {
    Num(i8),
    Tag(String),
}

impl TryFrom<ScoreOutcomeRepr> for ScoreOutcome {
    type Error = String;

    fn try_from(repr: ScoreOutcomeRepr) -> Result<Self, Self::Error> {
        match repr {
            ScoreOutcomeRepr::Num(v) => RawScore::new(v)
                .map(ScoreOutcome::Numeric)
                .ok_or_else(|| format!("raw score {v} outside [-2, 2]")),
            ScoreOutcomeRepr::Tag(tag) => match tag.as_str() {
                "irrelevant" => Ok(ScoreOutcome::Irrelevant),
                "missing" => Ok(ScoreOutcome::Missing),
                other => Err(format!("unknown score tag `{other}`")),
            },
        }
    }
}

impl From<ScoreOutcome> for ScoreOutcomeRepr {
    fn from(outcome: ScoreOutcome) -> ScoreOutcomeRepr {
        match outcome {
            ScoreOutcome::Numeric(raw) => ScoreOutcomeRepr::Num(raw.get()),
            ScoreOutcome::Irrelevant => ScoreOutcomeRepr::Tag("irrelevant".to_string()),
            ScoreOutcome::Missing => ScoreOutcomeRepr::Tag("missing".to_string()),
        }
    }
}

/// One scored prompt: the parse outcome plus the verbatim completion for
/// audit, keyed by (context, value, variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub context_index: u8,
    pub value_id: u8,
    pub variant_id: u8,
    pub raw_score: ScoreOutcome,
    pub raw_completion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_error: Option<String>,
    pub latency_ms: u64,
}

impl ScoreRecord {
    pub fn key(&self) -> (u8, u8, u8) {
        (self.context_index, self.value_id, self.variant_id)
    }
}

/// How the request fan-out executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}


#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Records file written incrementally; doubles as the resume source.
    pub checkpoint: Option<PathBuf>,
    /// Reuse any records already present in the checkpoint instead of
    /// re-querying them.
    pub resume: bool,
}

/// Result of an evaluation run.
#[derive(Debug)]
pub struct EvalSummary {
    /// One record per prompt, in batch order.
    pub records: Vec<ScoreRecord>,
    pub requests_issued: u64,
    pub reused_from_checkpoint: usize,
    pub missing: usize,
    pub irrelevant: usize,
    /// More than half the batch came back missing.
    pub degraded: bool,
}

/// Issues one request with retry and backoff and parses the completion.
/// Transport exhaustion yields a missing record; only authentication
/// failures abort.
pub fn query_model(
    backend: &dyn CompletionBackend,
    prompt: &PromptRecord,
    nonce: u64,
    config: &ModelConfig,
) -> Result<ScoreRecord, GatewayError> {
    let started = Instant::now();
    let mut attempt: u32 = 0;
    loop {
        match backend.complete(prompt, nonce, config) {
            Ok(text) => {
                let raw_score = parse_score(&text, &prompt.option_map);
                return Ok(ScoreRecord {
                    context_index: prompt.context_index,
                    value_id: prompt.value_id,
                    variant_id: prompt.variant_id,
                    raw_score,
                    raw_completion: text,
                    transport_error: None,
                    latency_ms: record_latency(backend, started),
                });
            }
            Err(BackendError::Auth(message)) => return Err(GatewayError::Auth(message)),
            Err(BackendError::RateLimited {
                retry_after_secs,
                message,
            }) => {
                if attempt >= config.max_retries {
                    return Ok(missing_record(prompt, message, backend, started));
                }
                let server_delay = retry_after_secs.map(Duration::from_secs);
                let delay = server_delay.unwrap_or_default().max(backoff(config, attempt));
                std::thread::sleep(delay);
            }
            Err(BackendError::Transport(message)) => {
                if attempt >= config.max_retries {
                    log::warn!(
                        "cell ({}, {}, {}) failed after {} attempts: {message}",
                        prompt.context_index,
                        prompt.value_id,
                        prompt.variant_id,
                        attempt + 1
                    );
                    return Ok(missing_record(prompt, message, backend, started));
                }
                std::thread::sleep(backoff(config, attempt));
            }
        }
        attempt += 1;
    }
}

fn record_latency(backend: &dyn CompletionBackend, started: Instant) -> u64 {
    if backend.deterministic() {
        0
    } else {
        started.elapsed().as_millis() as u64
    }
}

fn missing_record(
    prompt: &PromptRecord,
    reason: String,
    backend: &dyn CompletionBackend,
    started: Instant,
) -> ScoreRecord {
    ScoreRecord {
        context_index: prompt.context_index,
        value_id: prompt.value_id,
        variant_id: prompt.variant_id,
        raw_score: ScoreOutcome::Missing,
        raw_completion: String::new(),
        transport_error: Some(reason),
        latency_ms: record_latency(backend, started),
    }
}

fn backoff(config: &ModelConfig, attempt: u32) -> Duration {
    let ms = config
        .retry_base_delay_ms
        .saturating_mul(1u64 << attempt.min(6));
    Duration::from_millis(ms.min(30_000))
}

// Restores batch order on an append-only checkpoint: completions arrive
// in any order but are flushed only once every earlier work item has
// been written.
struct OrderedWriter {
    state: Mutex<WriterState>,
}

struct WriterState {
    file: BufWriter<std::fs::File>,
    pending: BTreeMap<usize, String>,
    next: usize,
}

impl OrderedWriter {
    fn open(path: &Path, append: bool) -> std::io::Result<OrderedWriter> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(append)
            .write(true)
            .truncate(!append)
            .open(path)?;
        Ok(OrderedWriter {
            state: Mutex::new(WriterState {
                file: BufWriter::new(file),
                pending: BTreeMap::new(),
                next: 0,
            }),
        })
    }

    fn push(&self, order: usize, line: String) -> std::io::Result<()> {
        let mut state = self.state.lock().expect("writer lock");
        state.pending.insert(order, line);
        let mut wrote = false;
        loop {
            let next = state.next;
            let Some(line) = state.pending.remove(&next) else {
                break;
            };
            state.file.write_all(line.as_bytes())?;
            state.file.write_all(b"\n")?;
            state.next += 1;
            wrote = true;
        }
        if wrote {
            state.file.flush()?;
        }
        Ok(())
    }
}

/// Runs a prompt batch against a backend. One record per prompt comes
/// back in batch order regardless of completion order; when a checkpoint
/// path is set, records are appended to it incrementally so interrupted
/// runs resume without re-querying completed cells.
pub fn run_evaluation(
    backend: &dyn CompletionBackend,
    config: &ModelConfig,
    batch: &[PromptRecord],
    options: &EvalOptions,
) -> Result<EvalSummary, GatewayError> {
    run_evaluation_with_mode(backend, config, batch, options, ExecMode::default())
}

pub fn run_evaluation_with_mode(
    backend: &dyn CompletionBackend,
    config: &ModelConfig,
    batch: &[PromptRecord],
    options: &EvalOptions,
    mode: ExecMode,
) -> Result<EvalSummary, GatewayError> {
    config.validate()?;

    let mut existing: BTreeMap<(u8, u8, u8), ScoreRecord> = BTreeMap::new();
    if options.resume {
        if let Some(path) = options.checkpoint.as_deref() {
            if path.exists() {
                for record in read_score_jsonl_path(path)? {
                    existing.insert(record.key(), record);
                }
            }
        }
    }

    let mut slots: Vec<Option<ScoreRecord>> = Vec::with_capacity(batch.len());
    let mut work: Vec<usize> = Vec::new();
    for (i, prompt) in batch.iter().enumerate() {
        let key = (prompt.context_index, prompt.value_id, prompt.variant_id);
        match existing.remove(&key) {
            Some(record) => slots.push(Some(record)),
            None => {
                slots.push(None);
                work.push(i);
            }
        }
    }
    let reused = batch.len() - work.len();

    let writer = match options.checkpoint.as_deref() {
        Some(path) => Some(OrderedWriter::open(path, options.resume)?),
        None => None,
    };

    let completed = AtomicUsize::new(0);
    let total = work.len();
    let worker = |(order, &batch_idx): (usize, &usize)| -> Result<(usize, ScoreRecord), GatewayError> {
        let record = query_model(backend, &batch[batch_idx], 0, config)?;
        if let Some(writer) = &writer {
            let line = serde_json::to_string(&record).expect("record serializes");
            writer.push(order, line)?;
        }
        let done = completed.fetch_add(1, Ordering::Relaxed) + 1;
        if done.is_multiple_of(2000) || done == total {
            log::info!("evaluation progress: {done}/{total} requests");
        }
        Ok((batch_idx, record))
    };

    let results: Vec<(usize, ScoreRecord)> = match mode {
        ExecMode::Sequential => work
            .iter()
            .enumerate()
            .map(worker)
            .collect::<Result<_, _>>()?,
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.parallelism)
                .build()
                .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
            pool.install(|| {
                work.par_iter()
                    .enumerate()
                    .map(worker)
                    .collect::<Result<_, _>>()
            })?
        }
    };

    let requests_issued = results.len() as u64;
    for (batch_idx, record) in results {
        slots[batch_idx] = Some(record);
    }
    let records: Vec<ScoreRecord> = slots
        .into_iter()
        .map(|slot| slot.expect("every batch position resolved"))
        .collect();

    let missing = records
        .iter()
        .filter(|r| r.raw_score == ScoreOutcome::Missing)
        .count();
    let irrelevant = records
        .iter()
        .filter(|r| r.raw_score == ScoreOutcome::Irrelevant)
        .count();
    let degraded = missing * 2 > records.len() && !records.is_empty();
    if degraded {
        log::warn!(
            "degraded run: {missing} of {} records are missing",
            records.len()
        );
    }
    Ok(EvalSummary {
        records,
        requests_issued,
        reused_from_checkpoint: reused,
        missing,
        irrelevant,
        degraded,
    })
}

/// Variance of repeated generations per prompt cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellStability {
    pub context_index: u8,
    pub value_id: u8,
    pub variant_id: u8,
    pub samples: u32,
    pub numeric: u32,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

/// Diagnostic report of the re-query probe. Does not alter scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub replicates: u32,
    pub cells: Vec<CellStability>,
    pub max_variance: Option<f64>,
    pub mean_variance: Option<f64>,
    /// Share of measurable cells with unit-score variance below 0.05.
    pub stable_fraction: Option<f64>,
}

/// Re-queries every prompt `replicates` times and reports per-cell
/// variance of the unit-normalized scores.
pub fn run_stability(
    backend: &dyn CompletionBackend,
    config: &ModelConfig,
    batch: &[PromptRecord],
    replicates: u32,
) -> Result<StabilityReport, GatewayError> {
    config.validate()?;
    let probe = |prompt: &PromptRecord| -> Result<CellStability, GatewayError> {
        let mut unit_scores = Vec::with_capacity(replicates as usize);
        for replicate in 1..=u64::from(replicates) {
            let record = query_model(backend, prompt, replicate, config)?;
            if let ScoreOutcome::Numeric(raw) = record.raw_score {
                unit_scores.push(crate::catalog::scale_to_unit(raw));
            }
        }
        let n = unit_scores.len() as u32;
        let mean = (n > 0).then(|| unit_scores.iter().sum::<f64>() / f64::from(n));
        let variance = mean.filter(|_| n > 1).map(|m| {
            unit_scores.iter().map(|s| (s - m).powi(2)).sum::<f64>() / f64::from(n)
        });
        Ok(CellStability {
            context_index: prompt.context_index,
            value_id: prompt.value_id,
            variant_id: prompt.variant_id,
            samples: replicates,
            numeric: n,
            mean,
            variance,
        })
    };

    #[cfg(feature = "parallel")]
    let cells: Vec<CellStability> = {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        pool.install(|| batch.par_iter().map(probe).collect::<Result<_, _>>())?
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<CellStability> = batch.iter().map(probe).collect::<Result<_, _>>()?;

    let variances: Vec<f64> = cells.iter().filter_map(|c| c.variance).collect();
    let max_variance = variances.iter().copied().reduce(f64::max);
    let mean_variance =
        (!variances.is_empty()).then(|| variances.iter().sum::<f64>() / variances.len() as f64);
    let stable_fraction = (!variances.is_empty())
        .then(|| variances.iter().filter(|v| **v < 0.05).count() as f64 / variances.len() as f64);
    Ok(StabilityReport {
        replicates,
        cells,
        max_variance,
        mean_variance,
        stable_fraction,
    })
}

/// Writes score records as JSON Lines.
pub fn write_score_jsonl<W: Write>(mut writer: W, records: &[ScoreRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads score records from JSON Lines.
pub fn read_score_jsonl<R: BufRead>(reader: R) -> Result<Vec<ScoreRecord>, GatewayError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScoreRecord =
            serde_json::from_str(&line).map_err(|e| GatewayError::Records {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_score_jsonl_path(path: &Path) -> Result<Vec<ScoreRecord>, GatewayError> {
    let file = std::fs::File::open(path)?;
    read_score_jsonl(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::OptionScheme;

    struct FailingBackend;

    impl CompletionBackend for FailingBackend {
        fn complete(
            &self,
            _prompt: &PromptRecord,
            _nonce: u64,
            _config: &ModelConfig,
        ) -> Result<String, BackendError> {
            Err(BackendError::Transport("HTTP 500".to_string()))
        }

        fn deterministic(&self) -> bool {
            true
        }
    }

    struct RejectingBackend;

    impl CompletionBackend for RejectingBackend {
        fn complete(
            &self,
            _prompt: &PromptRecord,
            _nonce: u64,
            _config: &ModelConfig,
        ) -> Result<String, BackendError> {
            Err(BackendError::Auth("401 Unauthorized".to_string()))
        }
    }

    fn small_batch(n: u8) -> Vec<PromptRecord> {
        let map = OptionScheme::five_point().option_map();
        (1..=n)
            .map(|value_id| PromptRecord {
                context_index: 1,
                value_id,
                variant_id: 1,
                text: format!("prompt {value_id}"),
                option_map: map.clone(),
            })
            .collect()
    }

    fn fast_config() -> ModelConfig {
        let mut config = ModelConfig::mock();
        config.max_retries = 2;
        config.retry_base_delay_ms = 0;
        config
    }

    #[test]
    fn exhausted_retries_become_missing_with_reason() {
        let summary = run_evaluation(
            &FailingBackend,
            &fast_config(),
            &small_batch(4),
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(summary.records.len(), 4);
        assert_eq!(summary.missing, 4);
        assert!(summary.degraded);
        for record in &summary.records {
            assert_eq!(record.raw_score, ScoreOutcome::Missing);
            assert_eq!(record.transport_error.as_deref(), Some("HTTP 500"));
        }
    }

    #[test]
    fn auth_failure_aborts_immediately() {
        let err = run_evaluation(
            &RejectingBackend,
            &fast_config(),
            &small_batch(2),
            &EvalOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GatewayError::Auth(_)));
    }

    #[test]
    fn empty_batch_yields_empty_records() {
        let summary = run_evaluation(
            &MockBackend::new(1),
            &fast_config(),
            &[],
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(summary.records.is_empty());
        assert!(!summary.degraded);
    }

    #[test]
    fn records_come_back_in_batch_order_with_unique_keys() {
        let batch = small_batch(20);
        let summary = run_evaluation(
            &MockBackend::new(3),
            &fast_config(),
            &batch,
            &EvalOptions::default(),
        )
        .unwrap();
        let keys: Vec<(u8, u8, u8)> = summary.records.iter().map(ScoreRecord::key).collect();
        let expected: Vec<(u8, u8, u8)> = batch
            .iter()
            .map(|p| (p.context_index, p.value_id, p.variant_id))
            .collect();
        assert_eq!(keys, expected);
        assert_eq!(summary.missing, 0);
    }

    #[test]
    fn score_outcome_serde_round_trips() {
        for outcome in [
            ScoreOutcome::Numeric(RawScore::new(-2).unwrap()),
            ScoreOutcome::Irrelevant,
            ScoreOutcome::Missing,
        ] {
            let json = serde_json::to_string(&outcome).unwrap();
            let back: ScoreOutcome = serde_json::from_str(&json).unwrap();
            assert_eq!(outcome, back);
        }
        assert_eq!(
            serde_json::to_string(&ScoreOutcome::Numeric(RawScore::new(1).unwrap())).unwrap(),
            "1"
        );
        assert!(serde_json::from_str::<ScoreOutcome>("7").is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut config = ModelConfig::mock();
        config.parallelism = 0;
        assert!(matches!(
            run_evaluation(
                &MockBackend::new(1),
                &config,
                &[],
                &EvalOptions::default()
            ),
            Err(GatewayError::InvalidConfig(_))
        ));
    }
}
