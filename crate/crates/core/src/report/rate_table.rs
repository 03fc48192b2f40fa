//! Rate table rendering: a grid of F1 scores by (model, scope) with an
//! appended Average column. Per column, the maximum cell is shaded as
//! best and the minimum as worst; ties mark every tied cell. With a
//! single row every cell is both best and worst (degenerate by
//! construction): it gets the best fill with the worst outline.

use crate::report::heatmap::parse_cell;
use crate::report::svg::{escape_xml, open_svg};
use crate::report::{Artifact, ReportError};
use crate::util::{fmt6, q6};

const BEST_FILL: &str = "#F4C6A6";
const WORST_FILL: &str = "#681048";

const CELL_W: u32 = 88;
const CELL_H: u32 = 26;
const LEFT: u32 = 150;
const TOP: u32 = 70;

/// The plotted content of one rate table. Rates are quantized to the
/// six-decimal grid on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub title: String,
    pub scope_labels: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl RateTable {
    pub fn new(
        title: impl Into<String>,
        scope_labels: Vec<String>,
        rows: Vec<(String, Vec<Option<f64>>)>,
    ) -> RateTable {
        for (_, rates) in &rows {
            assert_eq!(rates.len(), scope_labels.len());
        }
        RateTable {
            title: title.into(),
            scope_labels,
            rows: rows
                .into_iter()
                .map(|(model, rates)| (model, rates.into_iter().map(|r| r.map(q6)).collect()))
                .collect(),
        }
    }

    /// Row means over present scopes, quantized like every plotted value.
    pub fn averages(&self) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|(_, rates)| {
                let present: Vec<f64> = rates.iter().flatten().copied().collect();
                (!present.is_empty())
                    .then(|| q6(present.iter().sum::<f64>() / present.len() as f64))
            })
            .collect()
    }
}

/// Per-column best/worst markers over the full grid including the
/// Average column.
fn column_extremes(columns: &[Vec<Option<f64>>]) -> Vec<(Option<f64>, Option<f64>)> {
    columns
        .iter()
        .map(|column| {
            let present: Vec<f64> = column.iter().flatten().copied().collect();
            let best = present.iter().copied().reduce(f64::max);
            let worst = present.iter().copied().reduce(f64::min);
            (best, worst)
        })
        .collect()
}

/// Renders a rate table to (SVG, companion CSV).
pub fn render_rate_table(table: &RateTable) -> Artifact {
    let averages = table.averages();
    let n_cols = table.scope_labels.len() + 1; // + Average
    let n_rows = table.rows.len();

    // column-major copy including the Average column, for extremes
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n_rows); n_cols];
    for (i, (_, rates)) in table.rows.iter().enumerate() {
        for (j, rate) in rates.iter().enumerate() {
            columns[j].push(*rate);
        }
        columns[n_cols - 1].push(averages[i]);
    }
    let extremes = column_extremes(&columns);

    let width = LEFT + n_cols as u32 * CELL_W + 20;
    let height = TOP + n_rows as u32 * CELL_H + 30;
    let mut svg = open_svg(width, height);
    svg.push_str(&format!(
        "<text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"13\" \
         font-weight=\"bold\" fill=\"#222222\">{}</text>",
        escape_xml(&table.title)
    ));

    for (j, label) in table
        .scope_labels
        .iter()
        .map(String::as_str)
        .chain(std::iter::once("Average"))
        .enumerate()
    {
        let x = LEFT + j as u32 * CELL_W + CELL_W / 2;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"10\" \
             font-weight=\"bold\" fill=\"#333333\" text-anchor=\"middle\">{}</text>",
            escape_xml(label),
            y = TOP - 10
        ));
    }

    for (i, (model, rates)) in table.rows.iter().enumerate() {
        let y = TOP + i as u32 * CELL_H;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"10\" \
             fill=\"#333333\" text-anchor=\"end\">{}</text>",
            escape_xml(model),
            x = LEFT - 8,
            ty = y + CELL_H / 2 + 4
        ));
        for (j, value) in rates.iter().chain(std::iter::once(&averages[i])).enumerate() {
            let x = LEFT + j as u32 * CELL_W;
            let (best, worst) = extremes[j];
            let is_best = value.is_some() && *value == best;
            let is_worst = value.is_some() && *value == worst;
            let (fill, text_fill, stroke) = match (is_best, is_worst) {
                (true, true) => (BEST_FILL, "#222222", WORST_FILL),
                (true, false) => (BEST_FILL, "#222222", "#CCCCCC"),
                (false, true) => (WORST_FILL, "#FFFFFF", "#CCCCCC"),
                (false, false) => ("#FFFFFF", "#222222", "#CCCCCC"),
            };
            svg.push_str(&format!(
                "<rect class=\"rate-cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" \
                 height=\"{CELL_H}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"{sw}\"/>",
                sw = if is_best && is_worst { 2 } else { 1 }
            ));
            let text = value.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
            svg.push_str(&format!(
                "<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"10\" \
                 fill=\"{text_fill}\" text-anchor=\"middle\">{text}</text>",
                tx = x + CELL_W / 2,
                ty = y + CELL_H / 2 + 4
            ));
        }
    }
    svg.push_str("</svg>");

    Artifact {
        svg,
        csv: rate_table_csv(table, &averages),
    }
}

fn rate_table_csv(table: &RateTable, averages: &[Option<f64>]) -> String {
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    writer
        .write_record(["#meta", "rate_table", &table.title])
        .expect("meta record");
    let mut header = vec!["model".to_string()];
    header.extend(table.scope_labels.iter().cloned());
    header.push("Average".to_string());
    writer.write_record(&header).expect("header record");
    for (i, (model, rates)) in table.rows.iter().enumerate() {
        let mut record = vec![model.clone()];
        record.extend(rates.iter().map(|r| r.map_or_else(|| "NA".to_string(), fmt6)));
        record.push(averages[i].map_or_else(|| "NA".to_string(), fmt6));
        writer.write_record(&record).expect("data record");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf-8")
}

/// Parses a rate-table companion. The Average column is dropped; it is
/// recomputed on render.
pub fn parse_rate_table_csv(text: &str) -> Result<RateTable, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let meta = records
        .next()
        .ok_or_else(|| ReportError::Companion("empty file".to_string()))?
        .map_err(|e| ReportError::Companion(e.to_string()))?;
    if meta.get(0) != Some("#meta") || meta.get(1) != Some("rate_table") || meta.len() != 3 {
        return Err(ReportError::Companion("missing rate_table meta record".to_string()));
    }
    let title = meta.get(2).unwrap_or("").to_string();

    let header = records
        .next()
        .ok_or_else(|| ReportError::Companion("missing header".to_string()))?
        .map_err(|e| ReportError::Companion(e.to_string()))?;
    if header.len() < 2 || header.iter().next_back() != Some("Average") {
        return Err(ReportError::Companion(
            "rate table header must end with Average".to_string(),
        ));
    }
    let scope_labels: Vec<String> = header
        .iter()
        .skip(1)
        .take(header.len() - 2)
        .map(str::to_string)
        .collect();

    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| ReportError::Companion(e.to_string()))?;
        if record.len() != header.len() {
            return Err(ReportError::Companion("ragged rate row".to_string()));
        }
        let model = record.get(0).unwrap_or("").to_string();
        let mut rates = Vec::with_capacity(scope_labels.len());
        for field in record.iter().skip(1).take(scope_labels.len()) {
            rates.push(parse_cell(field)?);
        }
        rows.push((model, rates));
    }
    Ok(RateTable::new(title, scope_labels, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deepseek_row() -> RateTable {
        RateTable::new(
            "alignment rates by country",
            ["USA", "United Kingdom", "Canada", "Germany", "Australia", "India", "France"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            vec![(
                "deepseek-r1".to_string(),
                vec![
                    Some(0.504),
                    Some(0.543),
                    Some(0.468),
                    Some(0.685),
                    Some(0.624),
                    Some(0.255),
                    Some(0.624),
                ],
            )],
        )
    }

    #[test]
    fn average_of_the_printed_country_rates_is_0_529() {
        let averages = deepseek_row().averages();
        let avg = averages[0].unwrap();
        assert!((avg - 0.529).abs() <= 0.001, "average was {avg}");
    }

    #[test]
    fn single_row_marks_every_cell_best_and_worst() {
        let artifact = render_rate_table(&deepseek_row());
        // degenerate marking: best fill with worst outline on all 8 cells
        assert_eq!(
            artifact
                .svg
                .matches(&format!("fill=\"{BEST_FILL}\" stroke=\"{WORST_FILL}\""))
                .count(),
            8
        );
    }

    #[test]
    fn column_ties_mark_both_rows_best() {
        let table = RateTable::new(
            "t",
            vec!["a".to_string()],
            vec![
                ("m1".to_string(), vec![Some(0.7)]),
                ("m2".to_string(), vec![Some(0.7)]),
                ("m3".to_string(), vec![Some(0.2)]),
            ],
        );
        let artifact = render_rate_table(&table);
        // m1 and m2 tie for best in both the scope column and the Average
        // column; m3 is worst in both
        let best_only = artifact
            .svg
            .matches(&format!("fill=\"{BEST_FILL}\" stroke=\"#CCCCCC\""))
            .count();
        assert_eq!(best_only, 4);
        let worst_cells = artifact.svg.matches(&format!("fill=\"{WORST_FILL}\" stroke")).count();
        assert_eq!(worst_cells, 2);
    }

    #[test]
    fn na_cells_are_skipped_by_markers_and_averages() {
        let table = RateTable::new(
            "t",
            vec!["a".to_string(), "b".to_string()],
            vec![("m1".to_string(), vec![None, Some(0.4)])],
        );
        let averages = table.averages();
        assert_eq!(averages[0], Some(0.4));
        let artifact = render_rate_table(&table);
        assert!(artifact.svg.contains(">NA</text>"));
        assert!(artifact.csv.contains("NA"));
    }

    #[test]
    fn companion_round_trips_to_identical_svg() {
        let first = render_rate_table(&deepseek_row());
        let reparsed = parse_rate_table_csv(&first.csv).unwrap();
        let second = render_rate_table(&reparsed);
        assert_eq!(first.svg, second.svg);
        assert_eq!(first.csv, second.csv);
    }

    #[test]
    fn companion_average_column_matches_recomputation() {
        let table = deepseek_row();
        let artifact = render_rate_table(&table);
        let last_line = artifact.csv.lines().last().unwrap();
        assert!(last_line.ends_with(&fmt6(table.averages()[0].unwrap())));
    }
}
