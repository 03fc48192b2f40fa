//! Generator for the synthetic 112-row survey fixture shipped with the
//! repository (`fixtures/survey_112.csv`): four participants per
//! (country, topic) cell, arithmetic-pattern scores, and exactly eight
//! rows engineered to fail an attention check. A test pins the checked-in
//! file to this generator's output.

use crate::context::{Country, Topic};

/// Cells (1..=28, topic-major context index) whose first-listed
/// participant fails the first attention check.
pub const FAILING_CELLS: [u8; 8] = [2, 5, 8, 11, 14, 19, 23, 26];

/// Number of rows the fixture contains.
pub const FIXTURE_ROWS: usize = 112;

/// Rows engineered to fail attention checks.
pub const FIXTURE_ATTENTION_FAILURES: usize = FAILING_CELLS.len();

fn response_token(country_rank: u8, topic_rank: u8, participant: u8, value_id: u8) -> String {
    let c = u32::from(country_rank);
    let t = u32::from(topic_rank);
    let p = u32::from(participant);
    let k = u32::from(value_id);
    let kind = (c * 31 + t * 17 + p * 13 + k * 7) % 24;
    match kind {
        0 => "IRR".to_string(),
        1 => String::new(),
        _ => (((c + t + p + k) % 5) as i32 - 2).to_string(),
    }
}

/// Renders the fixture CSV. Fully deterministic; no randomness involved.
pub fn generate_survey_fixture() -> String {
    let genders = ["woman", "man", "nonbinary", "prefer not to say"];
    let mut writer = csv::Writer::from_writer(Vec::new());

    let mut header: Vec<String> = vec![
        "participant_id".into(),
        "country".into(),
        "topic".into(),
        "demo_age".into(),
        "demo_gender".into(),
    ];
    header.extend((1..=56).map(|i| format!("v{i}")));
    header.extend(
        ["attn1", "attn1_expected", "attn2", "attn2_expected", "open1", "open2"]
            .map(String::from),
    );
    writer.write_record(&header).expect("fixture header");

    let mut row_number = 0u32;
    for topic in Topic::ALL {
        for country in Country::ALL {
            let cell_index = 7 * (topic.rank() - 1) + country.rank();
            for participant in 0..4u8 {
                row_number += 1;
                let fails_attention =
                    FAILING_CELLS.contains(&cell_index) && participant == cell_index % 4;
                let mut row: Vec<String> = vec![
                    format!("P{row_number:03}"),
                    country.name().to_string(),
                    topic.name().to_string(),
                    (22 + (row_number * 7) % 50).to_string(),
                    genders[(row_number as usize) % genders.len()].to_string(),
                ];
                for value_id in 1..=56u8 {
                    row.push(response_token(
                        country.rank(),
                        topic.rank(),
                        participant,
                        value_id,
                    ));
                }
                let attn1 = if fails_attention { "0" } else { "2" };
                row.extend([
                    attn1.to_string(),
                    "2".to_string(),
                    "-2".to_string(),
                    "-2".to_string(),
                    format!(
                        "Values like tradition felt out of place for an assistant in {}.",
                        topic.name()
                    ),
                    format!(
                        "The assistant should follow the norms people expect in {}.",
                        country.name()
                    ),
                ]);
                writer.write_record(&row).expect("fixture row");
            }
        }
    }
    String::from_utf8(writer.into_inner().expect("fixture buffer")).expect("fixture is utf-8")
}
