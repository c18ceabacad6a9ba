//! Two-stage reward schedule: a fixed step budget in Stage I (pointwise +
//! binary + format), then Stage II (pointwise + pairwise + listwise over
//! parallel slices) for the rest of training.

use crate::config::CurriculumConfig;
use crate::domain::{RewardBreakdown, SliceMatrix, Stage};
use crate::error::Result;
use crate::ranking::{build_slices, listwise_rewards, pairwise_reward, stage2_reward};
use crate::stage1::stage1_reward;

/// Stage in effect at a training step: Stage I while `step < stage1Steps`,
/// Stage II afterwards. Deterministic and monotone.
pub fn stage_at(step: u64, config: &CurriculumConfig) -> Stage {
    if step < config.stage1_steps {
        Stage::One
    } else {
        Stage::Two
    }
}

/// Computes the reward breakdown for every cell of a batch grid.
///
/// Stage I grades each cell against its own label only. Stage II builds the
/// G parallel slices, computes pairwise rewards over annotated pairs and
/// listwise rewards per slice, and mixes them with the pointwise anchor.
/// The output grid is aligned with the input grid.
pub fn compute_batch_rewards(
    matrix: &SliceMatrix,
    stage: Stage,
    config: &CurriculumConfig,
) -> Result<Vec<Vec<RewardBreakdown>>> {
    let n = matrix.n_samples();
    let g = matrix.group_size();
    match stage {
        Stage::One => Ok((0..n)
            .map(|i| {
                (0..g)
                    .map(|j| {
                        stage1_reward(
                            matrix.cell(i, j),
                            matrix.labels()[i],
                            &config.stage1_weights,
                        )
                    })
                    .collect()
            })
            .collect()),
        Stage::Two => {
            let slices = build_slices(matrix)?;
            // pairwise_values[i][j]: the pair's reward for cell (i, j), None
            // when the sample is unpaired or either member's j-th parse failed.
            let mut pairwise_values: Vec<Vec<Option<f64>>> = vec![vec![None; g]; n];
            for i in 0..n {
                if !matrix.pair_first()[i] {
                    continue;
                }
                for (j, slice) in slices.iter().enumerate() {
                    if let (Some(first), Some(second)) = (slice.scores[i], slice.scores[i + 1]) {
                        let value = pairwise_reward(
                            first as u8,
                            second as u8,
                            matrix.labels()[i],
                            matrix.labels()[i + 1],
                            config.base_reward,
                            config.max_error,
                        );
                        // Both members of the pair share the same value.
                        pairwise_values[i][j] = Some(value);
                        pairwise_values[i + 1][j] = Some(value);
                    }
                }
            }
            let listwise_values: Vec<Vec<Option<f64>>> =
                slices.iter().map(listwise_rewards).collect();
            Ok((0..n)
                .map(|i| {
                    (0..g)
                        .map(|j| {
                            stage2_reward(
                                matrix.cell(i, j),
                                matrix.labels()[i],
                                pairwise_values[i][j],
                                listwise_values[j][i],
                                &config.stage2_weights,
                            )
                        })
                        .collect()
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Judgment, ParsedPrediction};
    use crate::parser::parse_completion;
    use proptest::prelude::*;

    fn config() -> CurriculumConfig {
        CurriculumConfig::default()
    }

    fn parsed(score: u8) -> ParsedPrediction {
        let judgment = if score >= 3 {
            Judgment::Yes
        } else {
            Judgment::No
        };
        ParsedPrediction::valid(judgment, score)
    }

    #[test]
    fn stage_at_respects_the_budget() {
        let mut c = config();
        c.stage1_steps = 100;
        assert_eq!(stage_at(0, &c), Stage::One);
        assert_eq!(stage_at(99, &c), Stage::One);
        assert_eq!(stage_at(100, &c), Stage::Two);
        c.stage1_steps = 0;
        assert_eq!(stage_at(0, &c), Stage::Two);
    }

    #[test]
    fn stage1_batch_applies_cellwise_rewards() {
        let rows = vec![
            vec![parse_completion("<answer>yes(5)</answer>")],
            vec![parse_completion("<answer>no(1)</answer>")],
        ];
        let m = SliceMatrix::new(rows, vec![5, 3], vec![false, false]).unwrap();
        let grid = compute_batch_rewards(&m, Stage::One, &config()).unwrap();
        assert_eq!(grid[0][0].total, 2.0); // 1*1 + 0.5*1 + 0.5*1
        assert!(grid[1][0].total < 2.0);
    }

    #[test]
    fn stage2_perfect_batch_hits_the_weighted_maximum() {
        // Predictions equal labels, pairs with exact difference match.
        let labels = vec![5, 2, 4, 1];
        let rows: Vec<Vec<ParsedPrediction>> =
            labels.iter().map(|&l| vec![parsed(l), parsed(l)]).collect();
        let m = SliceMatrix::new(rows, labels, vec![true, false, true, false]).unwrap();
        let grid = compute_batch_rewards(&m, Stage::Two, &config()).unwrap();
        for row in &grid {
            for b in row {
                assert!((b.total - 3.5).abs() < 1e-12, "total {}", b.total);
            }
        }
    }

    #[test]
    fn stage2_invalid_cell_zeroes_itself_and_mutes_partner_pairwise() {
        let rows = vec![
            vec![parsed(4), ParsedPrediction::invalid()],
            vec![parsed(2), parsed(2)],
        ];
        let m = SliceMatrix::new(rows, vec![4, 2], vec![true, false]).unwrap();
        let grid = compute_batch_rewards(&m, Stage::Two, &config()).unwrap();
        assert_eq!(grid[0][1].total, 0.0);
        // Partner's completion in slice 1 keeps pointwise/listwise but no pairwise.
        assert_eq!(grid[1][1].pairwise, None);
        assert!(grid[1][1].total > 0.0);
        // Slice 0 has both parses valid, so its pair is live.
        assert!(grid[0][0].pairwise.is_some());
        assert_eq!(grid[1][0].pairwise, grid[0][0].pairwise);
    }

    #[test]
    fn stage2_single_sample_batch_is_a_configuration_error() {
        let m = SliceMatrix::new(vec![vec![parsed(3), parsed(3)]], vec![3], vec![false]).unwrap();
        assert!(compute_batch_rewards(&m, Stage::Two, &config()).is_err());
    }

    proptest! {
        #[test]
        fn stage_transition_is_monotone(budget in 0u64..50, steps in proptest::collection::vec(0u64..100, 1..20)) {
            let mut c = config();
            c.stage1_steps = budget;
            let mut sorted = steps.clone();
            sorted.sort_unstable();
            let stages: Vec<Stage> = sorted.iter().map(|&s| stage_at(s, &c)).collect();
            for w in stages.windows(2) {
                prop_assert!(!(w[0] == Stage::Two && w[1] == Stage::One));
            }
        }

        #[test]
        fn output_shape_matches_input_shape(
            n in 2usize..8,
            g in 2usize..6,
            stage_two in proptest::bool::ANY,
            scores in proptest::collection::vec(proptest::option::of(1u8..=5), 64),
            labels_seed in proptest::collection::vec(1u8..=5, 8),
        ) {
            let rows: Vec<Vec<ParsedPrediction>> = (0..n)
                .map(|i| (0..g)
                    .map(|j| scores[(i * g + j) % scores.len()]
                        .map(parsed)
                        .unwrap_or_else(ParsedPrediction::invalid))
                    .collect())
                .collect();
            let labels: Vec<u8> = (0..n).map(|i| labels_seed[i % labels_seed.len()]).collect();
            let m = SliceMatrix::new(rows, labels, vec![false; n]).unwrap();
            let stage = if stage_two { Stage::Two } else { Stage::One };
            let grid = compute_batch_rewards(&m, stage, &config()).unwrap();
            prop_assert_eq!(grid.len(), n);
            for row in &grid {
                prop_assert_eq!(row.len(), g);
                for b in row {
                    for component in [b.pointwise, b.binary, b.format, b.pairwise, b.listwise]
                        .into_iter()
                        .flatten()
                    {
                        prop_assert!((0.0..=1.0).contains(&component));
                    }
                }
            }
        }

        #[test]
        fn stage1_totals_are_cell_local(
            scores in proptest::collection::vec(1u8..=5, 4),
            labels in proptest::collection::vec(1u8..=5, 2),
            replacement in proptest::option::of(1u8..=5),
        ) {
            let rows = vec![
                vec![parsed(scores[0]), parsed(scores[1])],
                vec![parsed(scores[2]), parsed(scores[3])],
            ];
            let m = SliceMatrix::new(rows, labels.clone(), vec![false, false]).unwrap();
            let before = compute_batch_rewards(&m, Stage::One, &config()).unwrap();

            // Change a different cell (1, 1); cell (0, 0) must not move.
            let rows2 = vec![
                vec![parsed(scores[0]), parsed(scores[1])],
                vec![
                    parsed(scores[2]),
                    replacement.map(parsed).unwrap_or_else(ParsedPrediction::invalid),
                ],
            ];
            let m2 = SliceMatrix::new(rows2, labels, vec![false, false]).unwrap();
            let after = compute_batch_rewards(&m2, Stage::One, &config()).unwrap();
            prop_assert_eq!(before[0][0], after[0][0]);
        }

        #[test]
        fn stage2_totals_are_slice_local(
            scores in proptest::collection::vec(1u8..=5, 6),
            labels in proptest::collection::vec(1u8..=5, 3),
            replacement in proptest::option::of(1u8..=5),
        ) {
            // 3 samples x 2 completions; perturbing slice 1 must leave slice 0 untouched.
            let rows = vec![
                vec![parsed(scores[0]), parsed(scores[1])],
                vec![parsed(scores[2]), parsed(scores[3])],
                vec![parsed(scores[4]), parsed(scores[5])],
            ];
            let m = SliceMatrix::new(rows, labels.clone(), vec![true, false, false]).unwrap();
            let before = compute_batch_rewards(&m, Stage::Two, &config()).unwrap();

            let rows2 = vec![
                vec![parsed(scores[0]), parsed(scores[1])],
                vec![parsed(scores[2]), replacement.map(parsed).unwrap_or_else(ParsedPrediction::invalid)],
                vec![parsed(scores[4]), parsed(scores[5])],
            ];
            let m2 = SliceMatrix::new(rows2, labels, vec![true, false, false]).unwrap();
            let after = compute_batch_rewards(&m2, Stage::Two, &config()).unwrap();
            for i in 0..3 {
                prop_assert_eq!(before[i][0], after[i][0]);
            }
        }
    }
}
