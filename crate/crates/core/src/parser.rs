//! Completion parsing against the answer-tag output grammar.
//!
//! A completion may carry arbitrary reasoning text; the answer is the last
//! `<answer>...</answer>` tag, whose content must be `yes(k)` or `no(k)`
//! with k a single digit in 1..=5. Anything else yields an invalid (but
//! well-typed) prediction: a policy must be scoreable on garbage, so this
//! module never fails.

use std::sync::LazyLock;

use regex::Regex;

use crate::domain::{Judgment, ParsedPrediction, LABEL_MAX, LABEL_MIN};

const OPEN_TAG: &str = "<answer>";
const CLOSE_TAG: &str = "</answer>";

static INNER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i)(yes|no)\(([0-9])\)$").expect("static pattern"));

/// Parses one completion. Extraction takes the last `<answer>` that is
/// followed by a `</answer>`, reading up to the first close after it, so a
/// final answer wins over intermediate ones and over stray tag fragments.
/// Whitespace around the inner pattern is tolerated; the judgment is
/// case-insensitive. Total and deterministic.
pub fn parse_completion(text: &str) -> ParsedPrediction {
    let Some(inner) = last_answer_span(text) else {
        return ParsedPrediction::invalid();
    };
    let Some(caps) = INNER.captures(inner.trim()) else {
        return ParsedPrediction::invalid();
    };
    let judgment = if caps[1].eq_ignore_ascii_case("yes") {
        Judgment::Yes
    } else {
        Judgment::No
    };
    let score: u8 = caps[2].parse().expect("single digit");
    if !(LABEL_MIN..=LABEL_MAX).contains(&score) {
        return ParsedPrediction::invalid();
    }
    ParsedPrediction::valid(judgment, score)
}

/// Content of the last opening tag that has a closing tag after it.
fn last_answer_span(text: &str) -> Option<&str> {
    let open = text
        .rmatch_indices(OPEN_TAG)
        .map(|(i, _)| i)
        .find(|&i| text[i + OPEN_TAG.len()..].contains(CLOSE_TAG))?;
    let start = open + OPEN_TAG.len();
    let close = text[start..].find(CLOSE_TAG)?;
    Some(&text[start..start + close])
}

/// Structural format reward: 1 for a structurally valid parse, else 0.
/// Judgment/score consistency is recorded on the parse but deliberately
/// does not affect this reward.
pub fn format_reward(parsed: &ParsedPrediction) -> f64 {
    if parsed.structurally_valid {
        1.0
    } else {
        0.0
    }
}
