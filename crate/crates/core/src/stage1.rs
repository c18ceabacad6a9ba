//! Stage-I foundational rewards: pointwise accuracy, binary judgment, and
//! output format, combined by the stage weights.

use crate::domain::{ParsedPrediction, RewardBreakdown, Stage, LABEL_MAX, LABEL_MIN};
use crate::parser::format_reward;

fn assert_score_range(value: u8, what: &str) {
    assert!(
        (LABEL_MIN..=LABEL_MAX).contains(&value),
        "{what} must be in {LABEL_MIN}..={LABEL_MAX}, got {value}"
    );
}

/// Normalized score-distance reward: 1 - |predicted - gold| / 4.
/// Exact matches earn 1.0 and each unit of error costs 0.25.
pub fn pointwise_reward(predicted: u8, gold: u8) -> f64 {
    assert_score_range(predicted, "predicted score");
    assert_score_range(gold, "gold label");
    let span = (LABEL_MAX - LABEL_MIN) as f64;
    1.0 - (predicted as f64 - gold as f64).abs() / span
}

/// Band-agreement reward: 1 iff both scores fall on the same side of the
/// similar/dissimilar split (scores >= 3 mean similar). Counters the safe
/// mid-scale guessing that a pure distance reward invites.
pub fn binary_reward(predicted: u8, gold: u8) -> f64 {
    assert_score_range(predicted, "predicted score");
    assert_score_range(gold, "gold label");
    if (predicted >= 3) == (gold >= 3) {
        1.0
    } else {
        0.0
    }
}

/// Weighted Stage-I total. A structurally invalid completion earns zero on
/// every component: there is no parsed score to grade, and granting partial
/// credit for unparseable output would reward gaming the parser.
pub fn stage1_reward(parsed: &ParsedPrediction, gold: u8, weights: &[f64; 3]) -> RewardBreakdown {
    assert_score_range(gold, "gold label");
    assert!(
        weights.iter().all(|w| *w >= 0.0),
        "weights must be non-negative"
    );
    if !parsed.structurally_valid {
        return RewardBreakdown {
            pointwise: Some(0.0),
            binary: Some(0.0),
            format: Some(0.0),
            pairwise: None,
            listwise: None,
            total: 0.0,
            stage: Stage::One,
        };
    }
    let score = parsed
        .score
        .expect("structurally valid parse carries a score");
    let pointwise = pointwise_reward(score, gold);
    let binary = binary_reward(score, gold);
    let format = format_reward(parsed);
    RewardBreakdown {
        pointwise: Some(pointwise),
        binary: Some(binary),
        format: Some(format),
        pairwise: None,
        listwise: None,
        total: weights[0] * pointwise + weights[1] * binary + weights[2] * format,
        stage: Stage::One,
    }
}
