//! Heatmap rendering: a colored grid of scopes (or all 28 contexts) by
//! the 56 values, with hatched missing cells, an embedded legend, and a
//! CSV companion that carries the exact plotted numbers.

use crate::report::svg::{escape_xml, legend, missing_pattern_defs, open_svg, ColorScale, MISSING_FILL};
use crate::report::{Artifact, ReportError};
use crate::util::{fmt6, q6};

const CELL: u32 = 14;
const LEFT: u32 = 170;
const TOP: u32 = 120;

/// The plotted content of one heatmap. Cell values are quantized to the
/// six-decimal grid on construction, so an in-memory render and a render
/// from the CSV companion are byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapData {
    pub title: String,
    pub scale: ColorScale,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Option<f64>>,
}

impl HeatmapData {
    pub fn new(
        title: impl Into<String>,
        scale: ColorScale,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        cells: Vec<Option<f64>>,
    ) -> HeatmapData {
        assert_eq!(cells.len(), row_labels.len() * col_labels.len());
        HeatmapData {
            title: title.into(),
            scale,
            row_labels,
            col_labels,
            cells: cells.into_iter().map(|c| c.map(q6)).collect(),
        }
    }

    fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.col_labels.len() + col]
    }
}

/// Renders a heatmap to (SVG, companion CSV).
pub fn render_heatmap(data: &HeatmapData) -> Artifact {
    let rows = data.row_labels.len() as u32;
    let cols = data.col_labels.len() as u32;
    let width = LEFT + cols * CELL + 30 + 70;
    let height = (TOP + rows * CELL + 30).max(TOP + 150);

    let mut svg = open_svg(width, height);
    svg.push_str(missing_pattern_defs());
    svg.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\" \
         font-weight=\"bold\" fill=\"#222222\">{}</text>",
        escape_xml(&data.title)
    ));

    for (col, label) in data.col_labels.iter().enumerate() {
        let x = LEFT + col as u32 * CELL + CELL / 2 + 3;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"8\" \
             fill=\"#333333\" transform=\"rotate(-60 {x} {y})\">{}</text>",
            escape_xml(label),
            y = TOP - 6
        ));
    }
    for (row, label) in data.row_labels.iter().enumerate() {
        let y = TOP + row as u32 * CELL + CELL / 2 + 3;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"9\" \
             fill=\"#333333\" text-anchor=\"end\">{}</text>",
            escape_xml(label),
            x = LEFT - 6
        ));
    }

    for row in 0..rows as usize {
        for col in 0..cols as usize {
            let x = LEFT + col as u32 * CELL;
            let y = TOP + row as u32 * CELL;
            let (class, fill) = match data.get(row, col) {
                Some(value) => ("cell", data.scale.color(value)),
                None => ("cell missing", MISSING_FILL.to_string()),
            };
            svg.push_str(&format!(
                "<rect class=\"{class}\" x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"{fill}\" stroke=\"#FFFFFF\" stroke-width=\"0.5\"/>"
            ));
        }
    }

    let legend_height = (rows * CELL).clamp(80, 160);
    svg.push_str(&legend(data.scale, LEFT + cols * CELL + 24, TOP, legend_height));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"9\" \
         fill=\"#333333\">missing</text>\
         <rect x=\"{rx}\" y=\"{ry}\" width=\"12\" height=\"12\" fill=\"{MISSING_FILL}\" \
         stroke=\"#666666\" stroke-width=\"0.5\"/>",
        x = LEFT + cols * CELL + 40,
        y = TOP + legend_height + 26,
        rx = LEFT + cols * CELL + 24,
        ry = TOP + legend_height + 16,
    ));
    svg.push_str("</svg>");

    Artifact {
        svg,
        csv: heatmap_csv(data),
    }
}

fn heatmap_csv(data: &HeatmapData) -> String {
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    writer
        .write_record(["#meta", "heatmap", &data.title, data.scale.name()])
        .expect("meta record");
    let mut header = vec![String::new()];
    header.extend(data.col_labels.iter().cloned());
    writer.write_record(&header).expect("header record");
    for (row, label) in data.row_labels.iter().enumerate() {
        let mut record = vec![label.clone()];
        record.extend(
            (0..data.col_labels.len())
                .map(|col| data.get(row, col).map_or_else(|| "NA".to_string(), fmt6)),
        );
        writer.write_record(&record).expect("data record");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf-8")
}

/// Parses a heatmap companion back into plot data. Re-rendering the
/// result yields the companion's SVG byte for byte.
pub fn parse_heatmap_csv(text: &str) -> Result<HeatmapData, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let meta = records
        .next()
        .ok_or_else(|| ReportError::Companion("empty file".to_string()))?
        .map_err(|e| ReportError::Companion(e.to_string()))?;
    if meta.get(0) != Some("#meta") || meta.get(1) != Some("heatmap") || meta.len() != 4 {
        return Err(ReportError::Companion("missing heatmap meta record".to_string()));
    }
    let title = meta.get(2).unwrap_or("").to_string();
    let scale = ColorScale::from_name(meta.get(3).unwrap_or(""))
        .ok_or_else(|| ReportError::Companion("unknown color scale".to_string()))?;

    let header = records
        .next()
        .ok_or_else(|| ReportError::Companion("missing column header".to_string()))?
        .map_err(|e| ReportError::Companion(e.to_string()))?;
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();

    let mut row_labels = Vec::new();
    let mut cells = Vec::new();
    for record in records {
        let record = record.map_err(|e| ReportError::Companion(e.to_string()))?;
        if record.len() != col_labels.len() + 1 {
            return Err(ReportError::Companion("ragged heatmap row".to_string()));
        }
        row_labels.push(record.get(0).unwrap_or("").to_string());
        for field in record.iter().skip(1) {
            cells.push(parse_cell(field)?);
        }
    }
    Ok(HeatmapData::new(title, scale, row_labels, col_labels, cells))
}

pub(crate) fn parse_cell(field: &str) -> Result<Option<f64>, ReportError> {
    let field = field.trim();
    if field == "NA" {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| ReportError::Companion(format!("bad cell `{field}`")))
}
