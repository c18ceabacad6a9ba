//! Parallel-slice ranking rewards.
//!
//! A batch of N samples with G completions each is reorganized into G
//! "parallel slices": slice j collects the j-th completion's predicted
//! score from every sample. Ranking rewards are then computed within each
//! slice, so all N x G completions receive their own signal instead of one
//! coarse value shared by the whole batch:
//!
//! - the pairwise reward grades a completion's score difference across an
//!   annotated sample pair, gated on getting the direction right;
//! - the listwise reward grades how far a completion's rank within its
//!   slice lands from the rank its sample's label holds among all labels.
//!
//! Both land in [0, 1]. Stage II mixes them with the pointwise anchor.

use crate::domain::{ParsedPrediction, RewardBreakdown, SliceMatrix, Stage, LABEL_MAX, LABEL_MIN};
use crate::error::{Error, Result};
use crate::stage1::pointwise_reward;

/// One parallel slice: the j-th completion's parsed score from each of the
/// N samples (`None` where the parse failed), plus the batch labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    /// Column index j within the batch grid (0-based).
    pub slice_index: usize,
    pub scores: Vec<Option<i32>>,
    pub labels: Vec<u8>,
}

/// Splits the batch grid into its G parallel slices. Cell (i, j) lands at
/// position i of slice j, a bijection between cells and slice entries.
pub fn build_slices(matrix: &SliceMatrix) -> Result<Vec<Slice>> {
    if matrix.n_samples() < 2 {
        return Err(Error::Config(format!(
            "slice ranking needs at least 2 samples (rank normalizer is N-1), got {}",
            matrix.n_samples()
        )));
    }
    let labels = matrix.labels().to_vec();
    Ok((0..matrix.group_size())
        .map(|j| Slice {
            slice_index: j,
            scores: (0..matrix.n_samples())
                .map(|i| matrix.cell(i, j).score.map(i32::from))
                .collect(),
            labels: labels.clone(),
        })
        .collect())
}

/// Ascending average ranks in [1, n]; tied values share the arithmetic
/// mean of the ranks they span. This is the same convention Spearman
/// evaluation uses, keeping training and evaluation aligned.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    assert!(
        !values.is_empty(),
        "average_ranks requires a non-empty list"
    );
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 collapse to their mean.
        let rank = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sign-gated pairwise reward for a valid sample pair in one slice.
///
/// With `dp = pred_first - pred_second` and `dt = gold_first - gold_second`:
/// a sign mismatch (sgn(0) = 0, so predicting a tie for an ordered pair
/// also mismatches) earns 0; otherwise the reward is `base_reward` plus a
/// magnitude bonus that shrinks with |dp - dt| / max_error, floored at
/// `base_reward`.
pub fn pairwise_reward(
    pred_first: u8,
    pred_second: u8,
    gold_first: u8,
    gold_second: u8,
    base_reward: f64,
    max_error: f64,
) -> f64 {
    for v in [pred_first, pred_second, gold_first, gold_second] {
        assert!(
            (LABEL_MIN..=LABEL_MAX).contains(&v),
            "pairwise scores must be in {LABEL_MIN}..={LABEL_MAX}, got {v}"
        );
    }
    assert!(
        (0.0..1.0).contains(&base_reward),
        "base reward must be in [0, 1)"
    );
    assert!(max_error > 0.0, "max_error must be positive");
    let dp = pred_first as i32 - pred_second as i32;
    let dt = gold_first as i32 - gold_second as i32;
    if dp.signum() != dt.signum() {
        return 0.0;
    }
    let magnitude = 1.0 - (dp - dt).abs() as f64 / max_error;
    base_reward + (1.0 - base_reward) * magnitude.max(0.0)
}

/// Per-sample listwise rewards for one slice:
/// `1 - |rank(score within slice) - rank(label among all labels)| / (N-1)`.
///
/// Predicted ranks are taken over the present scores only, while the ideal
/// rank always uses all N labels and the normalizer stays N-1, so the
/// reward remains defined under sporadic parse failures. Absent scores get
/// absent rewards.
pub fn listwise_rewards(slice: &Slice) -> Vec<Option<f64>> {
    let n = slice.labels.len();
    assert_eq!(slice.scores.len(), n, "slice scores/labels length mismatch");
    assert!(n >= 2, "listwise rewards need at least 2 samples");
    let mut out = vec![None; n];
    let present: Vec<usize> = (0..n).filter(|&i| slice.scores[i].is_some()).collect();
    if present.is_empty() {
        return out;
    }
    let ideal = average_ranks(&slice.labels.iter().map(|&l| l as f64).collect::<Vec<_>>());
    let present_scores: Vec<f64> = present
        .iter()
        .map(|&i| slice.scores[i].expect("present") as f64)
        .collect();
    let predicted = average_ranks(&present_scores);
    let normalizer = (n - 1) as f64;
    for (k, &i) in present.iter().enumerate() {
        out[i] = Some(1.0 - (predicted[k] - ideal[i]).abs() / normalizer);
    }
    out
}

/// Stage-II hybrid total: weighted pointwise + pairwise + listwise.
///
/// `pairwise` must be `None` when the sample is unpaired or its partner's
/// same-index completion failed to parse; a missing component contributes
/// nothing (advantages normalize within one sample's completions, which all
/// share pairing status, so the constant offset cancels there). An invalid
/// parse zeroes everything.
pub fn stage2_reward(
    parsed: &ParsedPrediction,
    gold: u8,
    pairwise: Option<f64>,
    listwise: Option<f64>,
    weights: &[f64; 3],
) -> RewardBreakdown {
    assert!(
        weights.iter().all(|w| *w >= 0.0),
        "weights must be non-negative"
    );
    if !parsed.structurally_valid {
        return RewardBreakdown {
            pointwise: Some(0.0),
            binary: None,
            format: None,
            pairwise: Some(0.0),
            listwise: Some(0.0),
            total: 0.0,
            stage: Stage::Two,
        };
    }
    let score = parsed
        .score
        .expect("structurally valid parse carries a score");
    let pointwise = pointwise_reward(score, gold);
    let total = weights[0] * pointwise
        + pairwise.map_or(0.0, |v| weights[1] * v)
        + listwise.map_or(0.0, |v| weights[2] * v);
    RewardBreakdown {
        pointwise: Some(pointwise),
        binary: None,
        format: None,
        pairwise,
        listwise,
        total,
        stage: Stage::Two,
    }
}
