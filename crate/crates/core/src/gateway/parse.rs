//! Completion parsing: a fixed extraction ladder that never raises.
//!
//! 1. First well-formed JSON object with a recognized answer.
//! 2. A standalone integer among the scheme's answer tokens.
//! 3. A case-insensitive option-label match.
//! 4. The irrelevant marker.
//!
//! Anything ambiguous (several distinct resolvable answers at one rung)
//! yields missing rather than a guess.

use serde_json::Value;

use crate::catalog::{OptionMap, ScaleAnswer};
use crate::gateway::ScoreOutcome;

// Keys that take precedence when a JSON object carries several
// resolvable entries, e.g. a score next to a confidence field.
const PREFERRED_KEYS: [&str; 7] = [
    "score",
    "answer",
    "rating",
    "response",
    "value",
    "inclination",
    "choice",
];

/// Parses a raw completion into a score, the irrelevant marker, or
/// missing. Total over arbitrary text.
pub fn parse_score(raw_completion: &str, option_map: &OptionMap) -> ScoreOutcome {
    match first_json_answer(raw_completion, option_map) {
        JsonScan::Hit(answer) => return answer.into(),
        JsonScan::Ambiguous => return ScoreOutcome::Missing,
        JsonScan::NoAnswer => {}
    }
    match standalone_token(raw_completion, option_map) {
        TokenScan::Hit(score) => return ScoreOutcome::Numeric(score),
        TokenScan::Ambiguous => return ScoreOutcome::Missing,
        TokenScan::None => {}
    }
    match label_answer(raw_completion, option_map) {
        LabelScan::Hit(answer) => return answer.into(),
        LabelScan::Ambiguous => return ScoreOutcome::Missing,
        LabelScan::None => {}
    }
    if contains_any_label(raw_completion, &option_map.irrelevant) {
        return ScoreOutcome::Irrelevant;
    }
    ScoreOutcome::Missing
}

impl From<ScaleAnswer> for ScoreOutcome {
    fn from(answer: ScaleAnswer) -> ScoreOutcome {
        match answer {
            ScaleAnswer::Score(s) => ScoreOutcome::Numeric(s),
            ScaleAnswer::Irrelevant => ScoreOutcome::Irrelevant,
        }
    }
}

enum JsonScan {
    Hit(ScaleAnswer),
    Ambiguous,
    NoAnswer,
}

/// Scans every `{` position for a parseable JSON object and resolves the
/// first one that contains at least one recognizable answer. Nested
/// objects are reached because every opening brace is tried.
fn first_json_answer(text: &str, map: &OptionMap) -> JsonScan {
    for (pos, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        let Some(Ok(Value::Object(object))) = stream.next() else {
            continue;
        };
        let mut answers: Vec<(String, ScaleAnswer)> = Vec::new();
        for (key, value) in &object {
            if let Some(answer) = resolve_json_value(value, map) {
                answers.push((key.to_lowercase(), answer));
            }
        }
        if answers.is_empty() {
            continue;
        }
        let preferred: Vec<&(String, ScaleAnswer)> = answers
            .iter()
            .filter(|(key, _)| PREFERRED_KEYS.contains(&key.as_str()))
            .collect();
        let pool: Vec<ScaleAnswer> = if preferred.is_empty() {
            answers.iter().map(|(_, a)| *a).collect()
        } else {
            preferred.iter().map(|(_, a)| *a).collect()
        };
        let first = pool[0];
        return if pool.iter().all(|a| *a == first) {
            JsonScan::Hit(first)
        } else {
            JsonScan::Ambiguous
        };
    }
    JsonScan::NoAnswer
}

fn resolve_json_value(value: &Value, map: &OptionMap) -> Option<ScaleAnswer> {
    match value {
        Value::Number(n) => {
            let token = if let Some(i) = n.as_i64() {
                i
            } else {
                // tolerate "2.0" style numbers with no fractional part
                let f = n.as_f64()?;
                if f.fract() != 0.0 || !f.is_finite() {
                    return None;
                }
                f as i64
            };
            map.resolve_token(token).map(ScaleAnswer::Score)
        }
        Value::String(s) => {
            if let Some(answer) = map.resolve_label(s) {
                return Some(answer);
            }
            let trimmed = s.trim();
            trimmed
                .parse::<i64>()
                .ok()
                .and_then(|t| map.resolve_token(t))
                .map(ScaleAnswer::Score)
        }
        _ => None,
    }
}

enum TokenScan {
    Hit(crate::catalog::RawScore),
    Ambiguous,
    None,
}

/// Finds standalone integers (word-bounded, not part of a decimal) that
/// are valid answer tokens.
fn standalone_token(text: &str, map: &OptionMap) -> TokenScan {
    let bytes = text.as_bytes();
    let mut found: Vec<i64> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let mut start = i;
        let mut end = i;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        // attach a sign when it is not glued to a preceding word
        if start > 0 && (bytes[start - 1] == b'-' || bytes[start - 1] == b'+') {
            let before_sign_ok = start < 2 || !is_token_adjacent(bytes[start - 2]);
            if before_sign_ok {
                start -= 1;
            }
        }
        let prev = (start > 0).then(|| bytes[start - 1]);
        let next = (end < bytes.len()).then(|| bytes[end]);
        let decimal_left = start >= 2 && bytes[start - 1] == b'.' && bytes[start - 2].is_ascii_digit();
        let decimal_right =
            end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit();
        let bounded = !prev.is_some_and(is_token_adjacent)
            && !next.is_some_and(is_token_adjacent)
            && !decimal_left
            && !decimal_right;
        if bounded {
            if let Ok(token) = text[start..end].parse::<i64>() {
                found.push(token);
            }
        }
        i = end;
    }
    let mut scores = found.into_iter().filter_map(|t| map.resolve_token(t));
    let Some(first) = scores.next() else {
        return TokenScan::None;
    };
    if scores.all(|s| s == first) {
        TokenScan::Hit(first)
    } else {
        TokenScan::Ambiguous
    }
}

fn is_token_adjacent(byte: u8) -> bool {
    byte.is_ascii_alphanumeric() || byte == b'_'
}

enum LabelScan {
    Hit(ScaleAnswer),
    Ambiguous,
    None,
}

/// Matches option labels case-insensitively, longest label first so that
/// "strongly agree" is consumed before "agree" can match inside it.
fn label_answer(text: &str, map: &OptionMap) -> LabelScan {
    let haystack = text.to_lowercase();
    let mut labels: Vec<&String> = map.labels.keys().collect();
    labels.sort_by_key(|l| std::cmp::Reverse(l.len()));

    let mut consumed: Vec<(usize, usize)> = Vec::new();
    let mut answers: Vec<ScaleAnswer> = Vec::new();
    for label in labels {
        for (pos, _) in haystack.match_indices(label.as_str()) {
            let end = pos + label.len();
            let overlaps = consumed.iter().any(|&(s, e)| pos < e && s < end);
            if overlaps || !word_bounded(&haystack, pos, end) {
                continue;
            }
            consumed.push((pos, end));
            answers.push(ScaleAnswer::Score(map.labels[label]));
        }
    }
    let Some(&first) = answers.first() else {
        return LabelScan::None;
    };
    if answers.iter().all(|a| *a == first) {
        LabelScan::Hit(first)
    } else {
        LabelScan::Ambiguous
    }
}

fn word_bounded(haystack: &str, start: usize, end: usize) -> bool {
    let before = haystack[..start].bytes().last();
    let after = haystack[end..].bytes().next();
    !before.is_some_and(|b| b.is_ascii_alphanumeric())
        && !after.is_some_and(|b| b.is_ascii_alphanumeric())
}

fn contains_any_label(text: &str, labels: &[String]) -> bool {
    let haystack = text.to_lowercase();
    labels.iter().any(|label| {
        haystack
            .match_indices(label.as_str())
            .any(|(pos, _)| word_bounded(&haystack, pos, pos + label.len()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{OptionScheme, RawScore};

    fn map() -> OptionMap {
        OptionScheme::five_point().option_map()
    }

    fn score(v: i8) -> ScoreOutcome {
        ScoreOutcome::Numeric(RawScore::new(v).unwrap())
    }

    #[test]
    fn json_object_with_value_name_key() {
        assert_eq!(parse_score(r#"{"Obedient": 1}"#, &map()), score(1));
    }

    #[test]
    fn json_after_prose_prefix() {
        assert_eq!(parse_score(r#"Sure! {"score": -2}"#, &map()), score(-2));
    }

    #[test]
    fn label_inside_sentence() {
        assert_eq!(parse_score("I'd say: Strongly Agree", &map()), score(2));
    }

    #[test]
    fn refusal_is_missing() {
        assert_eq!(
            parse_score("As an AI I cannot answer", &map()),
            ScoreOutcome::Missing
        );
    }

    #[test]
    fn nested_json_reaches_the_inner_object() {
        assert_eq!(
            parse_score(r#"{"result": {"score": 1}}"#, &map()),
            score(1)
        );
    }

    #[test]
    fn preferred_key_wins_over_noise_fields() {
        assert_eq!(
            parse_score(r#"{"score": 1, "confidence": 2}"#, &map()),
            score(1)
        );
    }

    #[test]
    fn conflicting_json_answers_are_ambiguous() {
        assert_eq!(
            parse_score(r#"{"Equality": 2, "Freedom": -1}"#, &map()),
            ScoreOutcome::Missing
        );
    }

    #[test]
    fn json_string_values_resolve_through_labels() {
        assert_eq!(
            parse_score(r#"{"Obedient": "agree"}"#, &map()),
            score(1)
        );
        assert_eq!(
            parse_score(r#"{"Obedient": "Irrelevant"}"#, &map()),
            ScoreOutcome::Irrelevant
        );
        assert_eq!(parse_score(r#"{"Obedient": "-2"}"#, &map()), score(-2));
    }

    #[test]
    fn one_to_four_tokens_map_through_the_option_map() {
        let alt = OptionScheme::one_to_four().option_map();
        assert_eq!(
            parse_score(r#"{"Obedient": "agree"}"#, &alt),
            score(1)
        );
        assert_eq!(parse_score(r#"{"score": 1}"#, &alt), score(2));
        assert_eq!(parse_score("my answer is 4", &alt), score(-2));
    }

    #[test]
    fn standalone_integer_with_sign() {
        assert_eq!(parse_score("I would rate this -1.", &map()), score(-1));
        assert_eq!(parse_score("Rating: 2", &map()), score(2));
    }

    #[test]
    fn repeated_equal_integers_are_fine_but_distinct_ones_are_not() {
        assert_eq!(parse_score("2 out of 2", &map()), score(2));
        assert_eq!(
            parse_score("somewhere between 1 and 2", &map()),
            ScoreOutcome::Missing
        );
    }

    #[test]
    fn decimals_and_glued_digits_are_not_tokens() {
        assert_eq!(parse_score("confidence 0.25 only", &map()), ScoreOutcome::Missing);
        assert_eq!(parse_score("see section A2 here", &map()), ScoreOutcome::Missing);
    }

    #[test]
    fn longest_label_wins_and_substrings_do_not_fire() {
        assert_eq!(parse_score("strongly disagree", &map()), score(-2));
        // "disagreeable" must not match "disagree"
        assert_eq!(
            parse_score("that is disagreeable", &map()),
            ScoreOutcome::Missing
        );
    }

    #[test]
    fn conflicting_labels_are_ambiguous() {
        assert_eq!(
            parse_score("neither agree nor disagree", &map()),
            ScoreOutcome::Missing
        );
    }

    #[test]
    fn irrelevant_marker_is_last_resort() {
        assert_eq!(
            parse_score("this value is irrelevant here", &map()),
            ScoreOutcome::Irrelevant
        );
    }

    #[test]
    fn truncated_json_falls_through_to_tokens() {
        assert_eq!(parse_score(r#"{"score": 1"#, &map()), score(1));
    }

    #[test]
    fn empty_input_is_missing() {
        assert_eq!(parse_score("", &map()), ScoreOutcome::Missing);
    }
}
