//! CSV serialization for matrices, grouped grids, rates, and rankings.
//!
//! Full matrices use a two-line header (value ids, then value names) with
//! three row-label columns (context index, country, topic). Cells are
//! printed with six decimal places, ties rounded half to even, and the
//! literal `NA` for missing.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::catalog::ValueItem;
use crate::context::enumerate_contexts;
use crate::metrics::{
    DistanceMatrix, MatrixSource, MetricsError, RankedItem, RankedList, ResponseMatrix, COLS, ROWS,
};
use crate::util::fmt6;

const NA: &str = "NA";

fn cell_to_string(value: Option<f64>) -> String {
    value.map_or_else(|| NA.to_string(), fmt6)
}

fn cell_from_str(field: &str, line: usize) -> Result<Option<f64>, MetricsError> {
    let field = field.trim();
    if field == NA {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| MetricsError::Format(format!("line {line}: bad cell `{field}`")))
}

fn write_full_grid<W: Write>(
    writer: W,
    catalog: &[ValueItem],
    cells: impl Fn(usize, usize) -> Option<f64>,
) -> Result<(), MetricsError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut ids = vec!["context_index".to_string(), "country".to_string(), "topic".to_string()];
    ids.extend(catalog.iter().map(|v| v.id.to_string()));
    csv_writer.write_record(&ids)?;
    let mut names = vec![String::new(), String::new(), String::new()];
    names.extend(catalog.iter().map(|v| v.name.clone()));
    csv_writer.write_record(&names)?;
    for context in enumerate_contexts() {
        let mut row = vec![
            context.index.to_string(),
            context.country.name().to_string(),
            context.topic.name().to_string(),
        ];
        row.extend((0..COLS).map(|col| cell_to_string(cells(context.row(), col))));
        csv_writer.write_record(&row)?;
    }
    csv_writer.flush()?;
    Ok(())
}

impl From<csv::Error> for MetricsError {
    fn from(e: csv::Error) -> MetricsError {
        MetricsError::Format(e.to_string())
    }
}

/// Writes a 28x56 response matrix.
pub fn write_response_matrix<W: Write>(
    writer: W,
    matrix: &ResponseMatrix,
    catalog: &[ValueItem],
) -> Result<(), MetricsError> {
    write_full_grid(writer, catalog, |row, col| matrix.get(row, col))
}

/// Writes per-cell contributor counts of a response matrix.
pub fn write_matrix_counts<W: Write>(
    writer: W,
    matrix: &ResponseMatrix,
    catalog: &[ValueItem],
) -> Result<(), MetricsError> {
    write_full_grid(writer, catalog, |row, col| {
        Some(f64::from(matrix.count(row, col)))
    })
}

/// Writes per-cell irrelevance rates of a response matrix.
pub fn write_matrix_irrelevance<W: Write>(
    writer: W,
    matrix: &ResponseMatrix,
    catalog: &[ValueItem],
) -> Result<(), MetricsError> {
    write_full_grid(writer, catalog, |row, col| matrix.irrelevance_rate(row, col))
}

/// Writes a 28x56 distance matrix.
pub fn write_distance_matrix<W: Write>(
    writer: W,
    matrix: &DistanceMatrix,
    catalog: &[ValueItem],
) -> Result<(), MetricsError> {
    write_full_grid(writer, catalog, |row, col| matrix.get(row, col))
}

/// The cells of a full matrix file, row-major, together with the value
/// names from its header.
pub struct ParsedGrid {
    pub cells: Vec<Option<f64>>,
    pub value_names: Vec<String>,
}

/// Reads a full 28x56 matrix file back. Rows may arrive in any order;
/// they are keyed by context index.
pub fn read_full_grid<R: Read>(reader: R) -> Result<ParsedGrid, MetricsError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut records = csv_reader.records();

    let ids = records
        .next()
        .ok_or_else(|| MetricsError::Format("empty matrix file".to_string()))?
        .map_err(MetricsError::from)?;
    if ids.len() != 3 + COLS {
        return Err(MetricsError::Format(format!(
            "expected {} columns, got {}",
            3 + COLS,
            ids.len()
        )));
    }
    let names = records
        .next()
        .ok_or_else(|| MetricsError::Format("missing name header".to_string()))?
        .map_err(MetricsError::from)?;
    let value_names: Vec<String> = names.iter().skip(3).map(str::to_string).collect();

    let mut cells = vec![None; ROWS * COLS];
    let mut seen = [false; ROWS];
    for (i, record) in records.enumerate() {
        let line = i + 3;
        let record = record.map_err(MetricsError::from)?;
        let index: usize = record
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| MetricsError::Format(format!("line {line}: bad context index")))?;
        if !(1..=ROWS).contains(&index) || seen[index - 1] {
            return Err(MetricsError::Format(format!(
                "line {line}: context index {index} invalid or repeated"
            )));
        }
        seen[index - 1] = true;
        for col in 0..COLS {
            cells[(index - 1) * COLS + col] =
                cell_from_str(record.get(3 + col).unwrap_or(""), line)?;
        }
    }
    if !seen.iter().all(|s| *s) {
        return Err(MetricsError::Format(
            "matrix file does not cover all 28 contexts".to_string(),
        ));
    }
    Ok(ParsedGrid { cells, value_names })
}

/// Reads a response matrix back, tagging it with the given source.
pub fn read_response_matrix<R: Read>(
    reader: R,
    source: MatrixSource,
) -> Result<ResponseMatrix, MetricsError> {
    ResponseMatrix::from_cells(source, read_full_grid(reader)?.cells)
}

pub fn read_distance_matrix<R: Read>(reader: R) -> Result<DistanceMatrix, MetricsError> {
    Ok(DistanceMatrix::from_cells(read_full_grid(reader)?.cells))
}

/// Writes a grouped grid: one labelled row of 56 cells per scope.
pub fn write_grouped_grid<W: Write>(
    writer: W,
    rows: &[(String, Vec<Option<f64>>)],
    catalog: &[ValueItem],
) -> Result<(), MetricsError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut ids = vec!["scope".to_string()];
    ids.extend(catalog.iter().map(|v| v.id.to_string()));
    csv_writer.write_record(&ids)?;
    let mut names = vec![String::new()];
    names.extend(catalog.iter().map(|v| v.name.clone()));
    csv_writer.write_record(&names)?;
    for (label, cells) in rows {
        assert_eq!(cells.len(), COLS, "grouped row must span all values");
        let mut row = vec![label.clone()];
        row.extend(cells.iter().map(|c| cell_to_string(*c)));
        csv_writer.write_record(&row)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads a grouped grid back: (scope label, 56 cells) per row, plus the
/// value names.
pub fn read_grouped_grid<R: Read>(
    reader: R,
) -> Result<(Vec<(String, Vec<Option<f64>>)>, Vec<String>), MetricsError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut value_names = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record.map_err(MetricsError::from)?;
        if record.len() != COLS + 1 {
            return Err(MetricsError::Format(format!(
                "line {}: expected {} columns, got {}",
                i + 1,
                COLS + 1,
                record.len()
            )));
        }
        match i {
            0 => {}
            1 => value_names = record.iter().skip(1).map(str::to_string).collect(),
            _ => {
                let label = record.get(0).unwrap_or("").to_string();
                let mut cells = Vec::with_capacity(COLS);
                for col in 0..COLS {
                    cells.push(cell_from_str(record.get(col + 1).unwrap_or(""), i + 1)?);
                }
                rows.push((label, cells));
            }
        }
    }
    Ok((rows, value_names))
}

/// Writes an F1 rate grid: one row per model, one column per scope. When
/// macro rows are supplied, `<scope>_macro` columns are appended.
pub fn write_rates_csv<W: Write>(
    writer: W,
    scope_labels: &[String],
    rows: &[(String, Vec<Option<f64>>)],
    macro_rows: Option<&[Vec<Option<f64>>]>,
) -> Result<(), MetricsError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut header = vec!["model".to_string()];
    header.extend(scope_labels.iter().cloned());
    if macro_rows.is_some() {
        header.extend(scope_labels.iter().map(|l| format!("{l}_macro")));
    }
    csv_writer.write_record(&header)?;
    for (i, (model, rates)) in rows.iter().enumerate() {
        assert_eq!(rates.len(), scope_labels.len());
        let mut row = vec![model.clone()];
        row.extend(rates.iter().map(|r| cell_to_string(*r)));
        if let Some(macros) = macro_rows {
            row.extend(macros[i].iter().map(|r| cell_to_string(*r)));
        }
        csv_writer.write_record(&row)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads a rates CSV back; macro columns, when present, are dropped.
/// Returns the scope labels and one (model, rates) row per model.
pub fn read_rates_csv<R: Read>(
    reader: R,
) -> Result<(Vec<String>, Vec<(String, Vec<Option<f64>>)>), MetricsError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = csv_reader.headers().map_err(MetricsError::from)?.clone();
    let mut scope_labels: Vec<String> = Vec::new();
    for field in headers.iter().skip(1) {
        if field.ends_with("_macro") {
            break;
        }
        scope_labels.push(field.to_string());
    }
    let mut rows = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record.map_err(MetricsError::from)?;
        let model = record.get(0).unwrap_or("").to_string();
        let mut rates = Vec::with_capacity(scope_labels.len());
        for col in 0..scope_labels.len() {
            rates.push(cell_from_str(record.get(col + 1).unwrap_or(""), i + 2)?);
        }
        rows.push((model, rates));
    }
    Ok((scope_labels, rows))
}

/// Writes rankings in long form: scope, rank, value id, value name,
/// distance. Unranked values carry an empty rank.
pub fn write_rankings_csv<W: Write>(
    writer: W,
    lists: &[RankedList],
) -> Result<(), MetricsError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["scope", "rank", "value_id", "value_name", "distance"])?;
    for list in lists {
        for item in &list.items {
            csv_writer.write_record([
                list.scope.as_str(),
                &item.rank.map_or_else(String::new, |r| r.to_string()),
                &item.value_id.to_string(),
                item.name.as_str(),
                &cell_to_string(item.distance),
            ])?;
        }
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads rankings back, grouped by scope in file order.
pub fn read_rankings_csv<R: Read>(reader: R) -> Result<Vec<RankedList>, MetricsError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut by_scope: Vec<RankedList> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, record) in csv_reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(MetricsError::from)?;
        let scope = record.get(0).unwrap_or("").to_string();
        let rank_field = record.get(1).unwrap_or("").trim();
        let rank = if rank_field.is_empty() {
            None
        } else {
            Some(rank_field.parse::<u32>().map_err(|_| {
                MetricsError::Format(format!("line {line}: bad rank `{rank_field}`"))
            })?)
        };
        let value_id: u8 = record
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| MetricsError::Format(format!("line {line}: bad value id")))?;
        let name = record.get(3).unwrap_or("").to_string();
        let distance = cell_from_str(record.get(4).unwrap_or(""), line)?;
        let slot = *index.entry(scope.clone()).or_insert_with(|| {
            by_scope.push(RankedList {
                scope,
                items: Vec::new(),
            });
            by_scope.len() - 1
        });
        by_scope[slot].items.push(RankedItem {
            value_id,
            name,
            distance,
            rank,
        });
    }
    Ok(by_scope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;
    use crate::metrics::MatrixSource;

    fn sample_matrix() -> ResponseMatrix {
        let cells: Vec<Option<f64>> = (0..ROWS * COLS)
            .map(|i| (i % 5 != 0).then(|| (i % 97) as f64 / 96.0))
            .collect();
        ResponseMatrix::from_cells(MatrixSource::Model, cells).unwrap()
    }

    #[test]
    fn response_matrix_round_trips_through_csv() {
        let catalog = default_catalog();
        let matrix = sample_matrix();
        let mut buf = Vec::new();
        write_response_matrix(&mut buf, &matrix, catalog).unwrap();
        let parsed = read_response_matrix(&buf[..], MatrixSource::Model).unwrap();
        for row in 0..ROWS {
            for col in 0..COLS {
                match (matrix.get(row, col), parsed.get(row, col)) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 5e-7),
                    (None, None) => {}
                    other => panic!("missing mismatch at ({row},{col}): {other:?}"),
                }
            }
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let catalog = default_catalog();
        let matrix = sample_matrix();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_response_matrix(&mut a, &matrix, catalog).unwrap();
        write_response_matrix(&mut b, &matrix, catalog).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("NA"));
        assert!(text.lines().count() == 2 + ROWS);
        let first_data_line = text.lines().nth(2).unwrap();
        assert!(first_data_line.starts_with("1,United States,Educational Supervision,"));
    }

    #[test]
    fn grouped_grid_round_trips() {
        let catalog = default_catalog();
        let rows = vec![
            ("Germany".to_string(), vec![Some(0.25); COLS]),
            ("France".to_string(), {
                let mut cells = vec![Some(0.5); COLS];
                cells[3] = None;
                cells
            }),
        ];
        let mut buf = Vec::new();
        write_grouped_grid(&mut buf, &rows, catalog).unwrap();
        let (parsed, names) = read_grouped_grid(&buf[..]).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].0, "Germany");
        assert_eq!(parsed[1].1[3], None);
        assert_eq!(names[0], "Equality");
    }

    #[test]
    fn rates_csv_round_trips_and_macro_columns_are_marked() {
        let scopes = vec!["Germany".to_string(), "France".to_string()];
        let rows = vec![("mock".to_string(), vec![Some(0.685), None])];
        let macros = vec![vec![Some(0.7), Some(0.1)]];
        let mut buf = Vec::new();
        write_rates_csv(&mut buf, &scopes, &rows, Some(&macros)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("model,Germany,France,Germany_macro,France_macro"));
        let (labels, parsed) = read_rates_csv(&buf[..]).unwrap();
        assert_eq!(labels, scopes);
        assert_eq!(parsed[0].1[0], Some(0.685));
        assert_eq!(parsed[0].1[1], None);
    }

    #[test]
    fn rankings_csv_round_trips() {
        let catalog = default_catalog();
        let mut distances = vec![Some(0.2); COLS];
        distances[7] = None;
        distances[3] = Some(0.9);
        let list = crate::metrics::alignment_ranking("Healthcare", &distances, catalog);
        let mut buf = Vec::new();
        write_rankings_csv(&mut buf, std::slice::from_ref(&list)).unwrap();
        let parsed = read_rankings_csv(&buf[..]).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].scope, "Healthcare");
        assert_eq!(parsed[0].items.len(), COLS);
        assert_eq!(parsed[0].items[0].value_id, 4);
        assert_eq!(parsed[0].items[0].rank, Some(1));
        assert_eq!(parsed[0].items.last().unwrap().rank, None);
    }
}
