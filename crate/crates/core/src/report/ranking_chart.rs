//! Ranking charts: horizontal bars of the 56 values sorted by descending
//! alignment distance. A reference list renders as a second stacked panel
//! sharing the distance axis. Values without a distance get a fixed
//! hatched bar.

use crate::metrics::{RankedItem, RankedList};
use crate::report::heatmap::parse_cell;
use crate::report::svg::{escape_xml, missing_pattern_defs, open_svg, MISSING_FILL};
use crate::report::{Artifact, ReportError};
use crate::util::{fmt6, q6};

const BAR_H: u32 = 12;
const ROW_H: u32 = 13;
const LABEL_W: u32 = 210;
const BAR_AREA: u32 = 420;
const PANEL_TOP: u32 = 46;
const PANEL_GAP: u32 = 40;
const BAR_FILL: &str = "#4C72B0";
const MISSING_BAR_W: u32 = 36;

/// The plotted content of one ranking chart: one panel, or two when a
/// reference ranking is supplied for side-by-side comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingChart {
    pub title: String,
    pub panels: Vec<RankedList>,
}

impl RankingChart {
    pub fn new(title: impl Into<String>, ranked: RankedList, reference: Option<RankedList>) -> RankingChart {
        let mut panels = vec![quantize_list(ranked)];
        if let Some(reference) = reference {
            panels.push(quantize_list(reference));
        }
        RankingChart {
            title: title.into(),
            panels,
        }
    }
}

fn quantize_list(mut list: RankedList) -> RankedList {
    for item in &mut list.items {
        item.distance = item.distance.map(q6);
    }
    list
}

/// Renders a ranking chart to (SVG, companion CSV).
pub fn render_ranking(chart: &RankingChart) -> Artifact {
    // shared axis across panels, from the quantized distances
    let axis_max = chart
        .panels
        .iter()
        .flat_map(|p| p.items.iter().filter_map(|i| i.distance))
        .fold(0.0f64, f64::max);
    let axis_max = if axis_max > 0.0 { axis_max } else { 1.0 };

    let panel_height = |panel: &RankedList| panel.items.len() as u32 * ROW_H + 24;
    let total_height: u32 = PANEL_TOP
        + chart.panels.iter().map(panel_height).sum::<u32>()
        + chart.panels.len().saturating_sub(1) as u32 * PANEL_GAP
        + 16;
    let width = LABEL_W + BAR_AREA + 110;

    let mut svg = open_svg(width, total_height);
    svg.push_str(missing_pattern_defs());
    svg.push_str(&format!(
        "<text x=\"20\" y=\"22\" font-family=\"sans-serif\" font-size=\"13\" \
         font-weight=\"bold\" fill=\"#222222\">{}</text>",
        escape_xml(&chart.title)
    ));

    let mut y = PANEL_TOP;
    for panel in &chart.panels {
        svg.push_str(&format!(
            "<text x=\"20\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" \
             font-weight=\"bold\" fill=\"#444444\">{}</text>",
            escape_xml(&panel.scope),
            ty = y + 2
        ));
        let base = y + 10;
        for (i, item) in panel.items.iter().enumerate() {
            let item_y = base + i as u32 * ROW_H;
            svg.push_str(&format!(
                "<text x=\"{x}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"8\" \
                 fill=\"#333333\" text-anchor=\"end\">{}</text>",
                escape_xml(&bar_label(item)),
                x = LABEL_W - 6,
                ty = item_y + BAR_H - 3
            ));
            match item.distance {
                Some(distance) => {
                    let bar_w = ((distance / axis_max) * f64::from(BAR_AREA)).round() as u32;
                    svg.push_str(&format!(
                        "<rect class=\"bar\" x=\"{LABEL_W}\" y=\"{item_y}\" width=\"{w}\" \
                         height=\"{BAR_H}\" fill=\"{BAR_FILL}\"/>",
                        w = bar_w.max(1)
                    ));
                    svg.push_str(&format!(
                        "<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"8\" \
                         fill=\"#555555\">{}</text>",
                        fmt6(distance),
                        tx = LABEL_W + bar_w.max(1) + 4,
                        ty = item_y + BAR_H - 3
                    ));
                }
                None => {
                    svg.push_str(&format!(
                        "<rect class=\"bar missing\" x=\"{LABEL_W}\" y=\"{item_y}\" \
                         width=\"{MISSING_BAR_W}\" height=\"{BAR_H}\" fill=\"{MISSING_FILL}\"/>"
                    ));
                    svg.push_str(&format!(
                        "<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"8\" \
                         fill=\"#999999\">NA</text>",
                        tx = LABEL_W + MISSING_BAR_W + 4,
                        ty = item_y + BAR_H - 3
                    ));
                }
            }
        }
        // axis line and end label, shared scaling across panels
        let axis_y = base + panel.items.len() as u32 * ROW_H + 4;
        svg.push_str(&format!(
            "<line x1=\"{LABEL_W}\" y1=\"{axis_y}\" x2=\"{x2}\" y2=\"{axis_y}\" \
             stroke=\"#888888\" stroke-width=\"1\"/>\
             <text x=\"{x2}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"8\" \
             fill=\"#555555\" text-anchor=\"end\">{}</text>",
            fmt6(axis_max),
            x2 = LABEL_W + BAR_AREA,
            ty = axis_y + 10
        ));
        y = axis_y + 10 + PANEL_GAP;
    }
    svg.push_str("</svg>");

    Artifact {
        svg,
        csv: ranking_csv(chart),
    }
}

fn bar_label(item: &RankedItem) -> String {
    match item.rank {
        Some(rank) => format!("{rank}. {}", item.name),
        None => item.name.clone(),
    }
}

fn ranking_csv(chart: &RankingChart) -> String {
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    writer
        .write_record(["#meta", "ranking", &chart.title])
        .expect("meta record");
    writer
        .write_record(["panel", "rank", "value_id", "value_name", "distance"])
        .expect("header record");
    for panel in &chart.panels {
        for item in &panel.items {
            writer
                .write_record([
                    panel.scope.as_str(),
                    &item.rank.map_or_else(String::new, |r| r.to_string()),
                    &item.value_id.to_string(),
                    item.name.as_str(),
                    &item.distance.map_or_else(|| "NA".to_string(), fmt6),
                ])
                .expect("data record");
        }
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf-8")
}

/// Parses a ranking companion back into chart data.
pub fn parse_ranking_csv(text: &str) -> Result<RankingChart, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let meta = records
        .next()
        .ok_or_else(|| ReportError::Companion("empty file".to_string()))?
        .map_err(|e| ReportError::Companion(e.to_string()))?;
    if meta.get(0) != Some("#meta") || meta.get(1) != Some("ranking") || meta.len() != 3 {
        return Err(ReportError::Companion("missing ranking meta record".to_string()));
    }
    let title = meta.get(2).unwrap_or("").to_string();

    let header = records
        .next()
        .ok_or_else(|| ReportError::Companion("missing header".to_string()))?
        .map_err(|e| ReportError::Companion(e.to_string()))?;
    if header.get(0) != Some("panel") {
        return Err(ReportError::Companion("missing panel header".to_string()));
    }

    let mut panels: Vec<RankedList> = Vec::new();
    for record in records {
        let record = record.map_err(|e| ReportError::Companion(e.to_string()))?;
        if record.len() != 5 {
            return Err(ReportError::Companion("ragged ranking row".to_string()));
        }
        let scope = record.get(0).unwrap_or("").to_string();
        let rank_field = record.get(1).unwrap_or("").trim();
        let rank = if rank_field.is_empty() {
            None
        } else {
            Some(rank_field.parse::<u32>().map_err(|_| {
                ReportError::Companion(format!("bad rank `{rank_field}`"))
            })?)
        };
        let value_id: u8 = record
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| ReportError::Companion("bad value id".to_string()))?;
        let item = RankedItem {
            value_id,
            name: record.get(3).unwrap_or("").to_string(),
            distance: parse_cell(record.get(4).unwrap_or(""))?,
            rank,
        };
        match panels.last_mut() {
            Some(panel) if panel.scope == scope => panel.items.push(item),
            _ => panels.push(RankedList {
                scope,
                items: vec![item],
            }),
        }
    }
    if panels.is_empty() || panels.len() > 2 {
        return Err(ReportError::Companion(format!(
            "expected 1 or 2 panels, found {}",
            panels.len()
        )));
    }
    Ok(RankingChart {
        title,
        panels: panels.into_iter().map(quantize_list).collect(),
    })
}
