//! Survey ingestion: parses crowdsourced CSV exports into validated
//! per-participant records, applies attention-check filtering, and
//! aggregates the kept records into the human response matrix.

pub mod fixture;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{scale_to_unit, RawScore, ValueItem};
use crate::context::{Context, Country, Topic};
use crate::metrics::{MatrixSource, ResponseMatrix, COLS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read survey file: {0}")]
    Io(#[from] std::io::Error),
    #[error("survey schema: {0}")]
    Schema(String),
    #[error("survey file: {0}")]
    Csv(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> IngestError {
        IngestError::Csv(e.to_string())
    }
}

/// One answer cell of a survey row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseCell {
    Score(RawScore),
    Irrelevant,
    Blank,
}

/// One recorded attention check: what the participant answered and what
/// the instrument prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionAnswer {
    pub answer: Option<RawScore>,
    pub expected: RawScore,
}

impl AttentionAnswer {
    pub fn passed(&self) -> bool {
        self.answer == Some(self.expected)
    }
}

/// One validated survey row.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyRecord {
    pub participant_id: String,
    pub country: Country,
    pub topic: Topic,
    pub demographics: Vec<(String, String)>,
    /// One cell per catalog value, in id order.
    pub responses: Vec<ResponseCell>,
    pub attention: [AttentionAnswer; 2],
    pub open_ended: Vec<String>,
}

/// Ingest accounting. `total_rows` counts every data row of the file and
/// always equals accepted + rejected_attention + rejected_malformed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_rows: usize,
    pub accepted: usize,
    pub rejected_attention: usize,
    pub rejected_malformed: usize,
    /// Accepted participants per (country, topic) cell.
    pub per_cell_accepted: BTreeMap<String, usize>,
    /// Line-numbered diagnostics for malformed rows.
    pub diagnostics: Vec<String>,
}

impl IngestReport {
    pub fn reconciles(&self) -> bool {
        self.total_rows == self.accepted + self.rejected_attention + self.rejected_malformed
            && self.per_cell_accepted.values().sum::<usize>() == self.accepted
    }
}

pub fn cell_key(country: Country, topic: Topic) -> String {
    format!("{} / {}", country.name(), topic.name())
}

struct SchemaLayout {
    demo: Vec<(usize, String)>,
    values: Vec<usize>,
    attn: [usize; 4],
    open: Vec<usize>,
    width: usize,
}

/// Validates the documented header layout:
/// `participant_id,country,topic,demo_*...,v1..vK,attn1,attn1_expected,attn2,attn2_expected,open*...`
fn parse_header(headers: &csv::StringRecord, catalog_len: usize) -> Result<SchemaLayout, IngestError> {
    let fields: Vec<&str> = headers.iter().collect();
    let schema_err = |msg: String| Err(IngestError::Schema(msg));

    if fields.len() < 3 || fields[0] != "participant_id" || fields[1] != "country" || fields[2] != "topic" {
        return schema_err(
            "header must start with participant_id,country,topic".to_string(),
        );
    }
    let mut i = 3;
    let mut demo = Vec::new();
    while i < fields.len() && fields[i].starts_with("demo_") {
        demo.push((i, fields[i].to_string()));
        i += 1;
    }
    let mut values = Vec::new();
    let mut expected_value = 1usize;
    while i < fields.len() && fields[i] == format!("v{expected_value}") {
        values.push(i);
        expected_value += 1;
        i += 1;
    }
    if values.len() != catalog_len {
        return schema_err(format!(
            "found {} response columns (v1..v{}), catalog has {} values",
            values.len(),
            values.len(),
            catalog_len
        ));
    }
    let attn_names = ["attn1", "attn1_expected", "attn2", "attn2_expected"];
    let mut attn = [0usize; 4];
    for (slot, name) in attn_names.iter().enumerate() {
        if i >= fields.len() || fields[i] != *name {
            return schema_err(format!("missing mandatory column `{name}`"));
        }
        attn[slot] = i;
        i += 1;
    }
    let mut open = Vec::new();
    while i < fields.len() {
        if !fields[i].starts_with("open") {
            return schema_err(format!("unexpected trailing column `{}`", fields[i]));
        }
        open.push(i);
        i += 1;
    }
    Ok(SchemaLayout {
        demo,
        values,
        attn,
        open,
        width: fields.len(),
    })
}

fn parse_score_token(token: &str) -> Option<RawScore> {
    let trimmed = token.trim();
    if let Ok(v) = trimmed.parse::<i8>() {
        return RawScore::new(v);
    }
    let lowered = trimmed.to_lowercase();
    let labels = [
        ("strongly disagree", -2),
        ("disagree", -1),
        ("neutral", 0),
        ("agree", 1),
        ("strongly agree", 2),
    ];
    labels
        .iter()
        .find(|(label, _)| *label == lowered)
        .and_then(|(_, v)| RawScore::new(*v))
}

fn parse_response_cell(token: &str) -> Result<ResponseCell, String> {
    let trimmed = token.trim();
    if trimmed.is_empty() {
        return Ok(ResponseCell::Blank);
    }
    if trimmed.eq_ignore_ascii_case("irr") {
        return Ok(ResponseCell::Irrelevant);
    }
    parse_score_token(trimmed)
        .map(ResponseCell::Score)
        .ok_or_else(|| format!("unparseable response `{trimmed}`"))
}

/// Parses a survey CSV into records plus a partial report (attention
/// filtering has not run yet, so `rejected_attention` is zero).
///
/// Malformed rows are counted and skipped with a line-numbered
/// diagnostic; a duplicate participant id keeps the first occurrence.
/// A header that does not match the documented schema aborts the ingest.
pub fn parse_survey_csv<R: Read>(
    reader: R,
    catalog: &[ValueItem],
) -> Result<(Vec<SurveyRecord>, IngestReport), IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let layout = parse_header(&headers, catalog.len())?;

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen_ids: BTreeMap<String, u64> = BTreeMap::new();

    for result in csv_reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        report.total_rows += 1;
        let reject = |message: String, report: &mut IngestReport| {
            report.rejected_malformed += 1;
            report.diagnostics.push(format!("line {line}: {message}"));
        };

        if record.len() != layout.width {
            reject(
                format!("expected {} fields, got {}", layout.width, record.len()),
                &mut report,
            );
            continue;
        }
        let participant_id = record.get(0).unwrap_or("").trim().to_string();
        if participant_id.is_empty() {
            reject("empty participant_id".to_string(), &mut report);
            continue;
        }
        if let Some(first_line) = seen_ids.get(&participant_id) {
            reject(
                format!("duplicate participant_id `{participant_id}` (first on line {first_line})"),
                &mut report,
            );
            continue;
        }
        let Some(country) = Country::from_name(record.get(1).unwrap_or("")) else {
            reject(
                format!("unknown country `{}`", record.get(1).unwrap_or("")),
                &mut report,
            );
            continue;
        };
        let Some(topic) = Topic::from_name(record.get(2).unwrap_or("")) else {
            reject(
                format!("unknown topic `{}`", record.get(2).unwrap_or("")),
                &mut report,
            );
            continue;
        };

        let mut responses = Vec::with_capacity(layout.values.len());
        let mut response_problem = None;
        for (k, &col) in layout.values.iter().enumerate() {
            match parse_response_cell(record.get(col).unwrap_or("")) {
                Ok(cell) => responses.push(cell),
                Err(message) => {
                    response_problem = Some(format!("v{}: {message}", k + 1));
                    break;
                }
            }
        }
        if let Some(problem) = response_problem {
            reject(problem, &mut report);
            continue;
        }

        let mut attention = [AttentionAnswer {
            answer: None,
            expected: RawScore::MAX,
        }; 2];
        let mut attention_problem = None;
        for check in 0..2 {
            let answer_field = record.get(layout.attn[check * 2]).unwrap_or("").trim();
            let expected_field = record.get(layout.attn[check * 2 + 1]).unwrap_or("");
            let Some(expected) = parse_score_token(expected_field) else {
                attention_problem = Some(format!(
                    "attn{}_expected: unparseable `{expected_field}`",
                    check + 1
                ));
                break;
            };
            let answer = if answer_field.is_empty() {
                None
            } else {
                match parse_score_token(answer_field) {
                    Some(score) => Some(score),
                    None => {
                        attention_problem =
                            Some(format!("attn{}: unparseable `{answer_field}`", check + 1));
                        break;
                    }
                }
            };
            attention[check] = AttentionAnswer { answer, expected };
        }
        if let Some(problem) = attention_problem {
            reject(problem, &mut report);
            continue;
        }

        seen_ids.insert(participant_id.clone(), line);
        records.push(SurveyRecord {
            participant_id,
            country,
            topic,
            demographics: layout
                .demo
                .iter()
                .map(|(col, name)| (name.clone(), record.get(*col).unwrap_or("").to_string()))
                .collect(),
            responses,
            attention,
            open_ended: layout
                .open
                .iter()
                .map(|col| record.get(*col).unwrap_or("").to_string())
                .collect(),
        });
    }
    Ok((records, report))
}

pub fn parse_survey_csv_path(
    path: &Path,
    catalog: &[ValueItem],
) -> Result<(Vec<SurveyRecord>, IngestReport), IngestError> {
    let file = std::fs::File::open(path)?;
    parse_survey_csv(std::io::BufReader::new(file), catalog)
}

/// Partitions records by their attention checks: kept iff both recorded
/// answers equal their expected answers.
pub fn apply_attention_filter(
    records: Vec<SurveyRecord>,
) -> (Vec<SurveyRecord>, Vec<SurveyRecord>) {
    records
        .into_iter()
        .partition(|r| r.attention.iter().all(AttentionAnswer::passed))
}

/// Parses, filters, and finalizes the accounting in one step.
pub fn ingest_survey<R: Read>(
    reader: R,
    catalog: &[ValueItem],
) -> Result<(Vec<SurveyRecord>, IngestReport), IngestError> {
    let (records, mut report) = parse_survey_csv(reader, catalog)?;
    let (kept, dropped) = apply_attention_filter(records);
    report.rejected_attention = dropped.len();
    report.accepted = kept.len();
    for record in &kept {
        *report
            .per_cell_accepted
            .entry(cell_key(record.country, record.topic))
            .or_insert(0) += 1;
    }
    Ok((kept, report))
}

pub fn ingest_survey_path(
    path: &Path,
    catalog: &[ValueItem],
) -> Result<(Vec<SurveyRecord>, IngestReport), IngestError> {
    let file = std::fs::File::open(path)?;
    ingest_survey(std::io::BufReader::new(file), catalog)
}

/// Aggregates kept records into the human response matrix H.
///
/// Each cell is the mean of unit-normalized scores over the context's
/// participants; irrelevant marks and blanks are excluded from the mean
/// but irrelevance is tracked per cell. Cells with no numeric answer stay
/// missing; contexts with no participants at all produce fully missing
/// rows.
pub fn aggregate_human_matrix(records: &[SurveyRecord]) -> ResponseMatrix {
    let mut sums = vec![0.0f64; crate::metrics::ROWS * COLS];
    let mut counts = vec![0u32; crate::metrics::ROWS * COLS];
    let mut irrelevant = vec![0u32; crate::metrics::ROWS * COLS];

    for record in records {
        let row = Context::of(record.country, record.topic).row();
        for (col, cell) in record.responses.iter().enumerate() {
            let slot = row * COLS + col;
            match cell {
                ResponseCell::Score(raw) => {
                    sums[slot] += scale_to_unit(*raw);
                    counts[slot] += 1;
                }
                ResponseCell::Irrelevant => irrelevant[slot] += 1,
                ResponseCell::Blank => {}
            }
        }
    }

    let mut matrix = ResponseMatrix::empty(MatrixSource::Human);
    for row in 0..crate::metrics::ROWS {
        for col in 0..COLS {
            let slot = row * COLS + col;
            let value = (counts[slot] > 0).then(|| sums[slot] / f64::from(counts[slot]));
            matrix.set(row, col, value, counts[slot], irrelevant[slot]);
        }
    }
    matrix
}
