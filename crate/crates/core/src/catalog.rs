//! The value catalog: 56 universal values with their definitions, the
//! five-level agreement scale, and the option schemes that map rendered
//! answer options back to raw scores.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of values in a complete catalog.
pub const VALUE_COUNT: usize = 56;

const DEFAULT_CATALOG_CSV: &str = include_str!("../data/values.csv");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog header must be `id,name,definition[,motivational_type]`, got `{0}`")]
    Header(String),
    #[error("catalog line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("catalog has {found} values, expected {expected}")]
    Cardinality { found: usize, expected: usize },
    #[error("catalog line {line}: duplicate value name `{name}`")]
    DuplicateName { name: String, line: u64 },
    #[error("value ids must cover 1..={expected} exactly once; id {id} is {problem}")]
    IdCoverage {
        expected: usize,
        id: u8,
        problem: &'static str,
    },
}

/// One of the 56 universal values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueItem {
    pub id: u8,
    pub name: String,
    pub definition: String,
    /// Motivational type, populated only when the catalog file carries the
    /// optional fourth column. The bundled catalog leaves it empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motivational_type: Option<String>,
}

/// Raw agreement score on the five-level scale, constrained to [-2, 2].
///
/// The irrelevant marker is deliberately not representable here: anything
/// that is not a numeric level must be routed through missing-cell handling
/// before it can reach an average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct RawScore(i8);

impl RawScore {
    pub const MIN: RawScore = RawScore(-2);
    pub const MAX: RawScore = RawScore(2);

    pub fn new(v: i8) -> Option<RawScore> {
        (-2..=2).contains(&v).then_some(RawScore(v))
    }

    pub fn get(self) -> i8 {
        self.0
    }
}

impl TryFrom<i8> for RawScore {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        RawScore::new(v).ok_or_else(|| format!("raw score {v} outside [-2, 2]"))
    }
}

impl From<RawScore> for i8 {
    fn from(s: RawScore) -> i8 {
        s.0
    }
}

impl std::fmt::Display for RawScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Affine map from the raw scale onto the unit interval: (raw + 2) / 4.
///
/// Monotone, with -2 -> 0.0, 0 -> 0.5, and 2 -> 1.0. Every result is an
/// exact dyadic fraction, so sums of unit scores are order-independent.
pub fn scale_to_unit(raw: RawScore) -> f64 {
    (f64::from(raw.get()) + 2.0) / 4.0
}

/// A numeric answer, or the distinguished mark that the value does not
/// apply in the given scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScaleAnswer {
    Score(RawScore),
    Irrelevant,
}

/// One agreement level of the response scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLevel {
    pub score: RawScore,
    pub label: String,
}

/// The five agreement levels plus the irrelevant marker.
///
/// The irrelevant marker never maps to a raw score; it lives outside the
/// numeric scale so that means cannot silently absorb it as neutrality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseScale {
    pub levels: Vec<ScaleLevel>,
    pub irrelevant_label: String,
}

impl ResponseScale {
    /// The canonical scale: -2 Strongly Disagree .. 2 Strongly Agree,
    /// plus Irrelevant.
    pub fn five_point() -> ResponseScale {
        let levels = [
            (-2, "Strongly Disagree"),
            (-1, "Disagree"),
            (0, "Neutral"),
            (1, "Agree"),
            (2, "Strongly Agree"),
        ];
        ResponseScale {
            levels: levels
                .into_iter()
                .map(|(score, label)| ScaleLevel {
                    score: RawScore::new(score).expect("level in range"),
                    label: label.to_string(),
                })
                .collect(),
            irrelevant_label: "Irrelevant".to_string(),
        }
    }

    /// Checks the scale invariants: strictly increasing raw scores,
    /// endpoint labels, and a non-numeric irrelevant marker.
    pub fn validate(&self) -> Result<(), String> {
        if self.levels.len() != 5 {
            return Err(format!("expected 5 levels, got {}", self.levels.len()));
        }
        for pair in self.levels.windows(2) {
            if pair[0].score >= pair[1].score {
                return Err("raw scores must be strictly increasing".to_string());
            }
        }
        if self.levels[0].score != RawScore::MIN || self.levels[4].score != RawScore::MAX {
            return Err("scale must span raw scores -2..=2".to_string());
        }
        if !self.levels[0].label.eq_ignore_ascii_case("strongly disagree")
            || !self.levels[4].label.eq_ignore_ascii_case("strongly agree")
        {
            return Err("endpoints must be labelled Strongly Disagree / Strongly Agree".to_string());
        }
        let irr = self.irrelevant_label.trim();
        if irr.is_empty() || irr.parse::<i64>().is_ok() {
            return Err("irrelevant marker must be a non-numeric label".to_string());
        }
        Ok(())
    }
}

/// How answer options are presented inside a prompt: an ordered list of
/// (token, label, raw score) triples plus the irrelevant option.
///
/// The canonical presentation uses the raw scores themselves as tokens.
/// The alternative 1..4 presentation (strongly agree first, no neutral)
/// is available for option-map experiments; scores from it land on
/// {-2, -1, 1, 2}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionScheme {
    pub options: Vec<SchemeOption>,
    pub irrelevant_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeOption {
    /// Numeric token a respondent may answer with.
    pub token: i64,
    pub label: String,
    pub score: RawScore,
}

impl OptionScheme {
    pub fn five_point() -> OptionScheme {
        let scale = ResponseScale::five_point();
        OptionScheme {
            options: scale
                .levels
                .iter()
                .map(|lvl| SchemeOption {
                    token: i64::from(lvl.score.get()),
                    label: lvl.label.clone(),
                    score: lvl.score,
                })
                .collect(),
            irrelevant_label: scale.irrelevant_label,
        }
    }

    pub fn one_to_four() -> OptionScheme {
        let rows = [
            (1, "Strongly Agree", 2),
            (2, "Agree", 1),
            (3, "Disagree", -1),
            (4, "Strongly Disagree", -2),
        ];
        OptionScheme {
            options: rows
                .into_iter()
                .map(|(token, label, score)| SchemeOption {
                    token,
                    label: label.to_string(),
                    score: RawScore::new(score).expect("score in range"),
                })
                .collect(),
            irrelevant_label: "Irrelevant".to_string(),
        }
    }

    /// Scheme selected by name; used by config files.
    pub fn by_name(name: &str) -> Option<OptionScheme> {
        match name {
            "five_point" => Some(OptionScheme::five_point()),
            "one_to_four" => Some(OptionScheme::one_to_four()),
            _ => None,
        }
    }

    /// The single options line rendered into prompts.
    pub fn render_line(&self) -> String {
        let mut parts: Vec<String> = self
            .options
            .iter()
            .map(|o| format!("{}: {}", o.token, o.label))
            .collect();
        parts.push(format!("or {}", self.irrelevant_label));
        format!("Options: {}.", parts.join(", "))
    }

    /// The parsing table for answers produced under this scheme.
    pub fn option_map(&self) -> OptionMap {
        OptionMap {
            numeric: self.options.iter().map(|o| (o.token, o.score)).collect(),
            labels: self
                .options
                .iter()
                .map(|o| (o.label.to_lowercase(), o.score))
                .collect(),
            irrelevant: vec![self.irrelevant_label.to_lowercase()],
        }
    }
}

/// Mapping from answer tokens and option labels back to raw scores.
///
/// Serialized alongside each prompt so that records can be parsed without
/// reconstructing the scheme that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionMap {
    /// Numeric answer token -> raw score.
    pub numeric: BTreeMap<i64, RawScore>,
    /// Lowercased option label -> raw score.
    pub labels: BTreeMap<String, RawScore>,
    /// Lowercased labels that mark a value as not applicable.
    pub irrelevant: Vec<String>,
}

impl OptionMap {
    pub fn resolve_token(&self, token: i64) -> Option<RawScore> {
        self.numeric.get(&token).copied()
    }

    /// Resolves an exact label (after trimming and lowercasing).
    pub fn resolve_label(&self, label: &str) -> Option<ScaleAnswer> {
        let needle = label.trim().to_lowercase();
        if self.irrelevant.contains(&needle) {
            return Some(ScaleAnswer::Irrelevant);
        }
        self.labels.get(&needle).copied().map(ScaleAnswer::Score)
    }
}

/// Loads and validates a value catalog from a CSV file.
pub fn load_catalog(path: &Path) -> Result<Vec<ValueItem>, CatalogError> {
    let file = std::fs::File::open(path)?;
    load_catalog_from_reader(file)
}

/// Loads a catalog from any reader. See the file format in the README:
/// UTF-8 CSV with header `id,name,definition` and an optional fourth
/// `motivational_type` column.
pub fn load_catalog_from_reader<R: Read>(reader: R) -> Result<Vec<ValueItem>, CatalogError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|e| CatalogError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let header_fields: Vec<&str> = headers.iter().collect();
    let has_type_column = match header_fields.as_slice() {
        ["id", "name", "definition"] => false,
        ["id", "name", "definition", "motivational_type"] => true,
        _ => return Err(CatalogError::Header(header_fields.join(","))),
    };

    let mut items: Vec<(u64, ValueItem)> = Vec::new();
    for result in csv_reader.records() {
        let record = result.map_err(|e| CatalogError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| CatalogError::Parse { line, message };

        let id: u8 = record
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid id `{}`", record.get(0).unwrap_or(""))))?;
        let name = record.get(1).unwrap_or("").trim().to_string();
        if name.is_empty() {
            return Err(parse_err("empty value name".to_string()));
        }
        let definition = record.get(2).unwrap_or("").trim().to_string();
        if definition.is_empty() {
            return Err(parse_err(format!("empty definition for `{name}`")));
        }
        let motivational_type = if has_type_column {
            record
                .get(3)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        } else {
            None
        };
        items.push((
            line,
            ValueItem {
                id,
                name,
                definition,
                motivational_type,
            },
        ));
    }

    if items.len() != VALUE_COUNT {
        return Err(CatalogError::Cardinality {
            found: items.len(),
            expected: VALUE_COUNT,
        });
    }

    let mut seen_names: BTreeMap<String, u64> = BTreeMap::new();
    let mut seen_ids: BTreeSet<u8> = BTreeSet::new();
    for (line, item) in &items {
        if seen_names.insert(item.name.to_lowercase(), *line).is_some() {
            return Err(CatalogError::DuplicateName {
                name: item.name.clone(),
                line: *line,
            });
        }
        if !(1..=VALUE_COUNT as u8).contains(&item.id) {
            return Err(CatalogError::IdCoverage {
                expected: VALUE_COUNT,
                id: item.id,
                problem: "out of range",
            });
        }
        if !seen_ids.insert(item.id) {
            return Err(CatalogError::IdCoverage {
                expected: VALUE_COUNT,
                id: item.id,
                problem: "duplicated",
            });
        }
    }

    let mut values: Vec<ValueItem> = items.into_iter().map(|(_, item)| item).collect();
    values.sort_by_key(|v| v.id);
    Ok(values)
}

/// The catalog bundled with the crate, parsed once.
pub fn default_catalog() -> &'static [ValueItem] {
    static CATALOG: OnceLock<Vec<ValueItem>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        load_catalog_from_reader(DEFAULT_CATALOG_CSV.as_bytes())
            .expect("bundled catalog is valid")
    })
}
