//! Closed-loop verification without a language model.
//!
//! A 3-parameter synthetic policy (systematic bias, score noise, format
//! error rate) emits completions for seeded synthetic datasets. Coordinate
//! hill climbing then optimizes the policy against the curriculum's own
//! rewards. If the reward design is sound, climbing the reward surface must
//! drag held-out Spearman up with it; that is the property the simulator
//! exists to witness. Hill climbing (not gradients) because the policy is a
//! black box; the object under test is the reward landscape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::CurriculumConfig;
use crate::curriculum::{compute_batch_rewards, stage_at};
use crate::domain::{detect_pairs, Sample, SliceMatrix};
use crate::error::{Error, Result};
use crate::metrics::spearman;
use crate::parser::parse_completion;

/// Completion emitted when the policy "fails the format": no answer tag.
pub const MALFORMED_COMPLETION: &str =
    "The similarity here is hard to pin down; skipping the verdict.";

// Seed streams, mixed so related runs never share RNG state.
const STREAM_DATASET: u64 = 0x01;
const STREAM_HELDOUT_DATASET: u64 = 0x02;
const STREAM_EVAL_BASE: u64 = 0x1_0000;
const STREAM_HELDOUT_EVAL_BASE: u64 = 0x2_0000;

/// SplitMix64-style seed derivation for independent RNG streams.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stand-in for a scoring policy: emits `<answer>{yes|no}(k)</answer>` with
/// `k = clamp(round(label + bias + noise), 1, 5)`, or a malformed string
/// with probability `format_error_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPolicy {
    pub bias: f64,
    pub noise_sigma: f64,
    pub format_error_rate: f64,
}

impl SyntheticPolicy {
    pub fn new(bias: f64, noise_sigma: f64, format_error_rate: f64) -> Result<Self> {
        if !bias.is_finite() {
            return Err(Error::Config(format!("bias must be finite, got {bias}")));
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "noiseSigma must be non-negative, got {noise_sigma}"
            )));
        }
        if !format_error_rate.is_finite() || !(0.0..=1.0).contains(&format_error_rate) {
            return Err(Error::Config(format!(
                "formatErrorRate must be in [0, 1], got {format_error_rate}"
            )));
        }
        Ok(SyntheticPolicy {
            bias,
            noise_sigma,
            format_error_rate,
        })
    }

    /// The noiseless, error-free policy that always emits the gold label.
    pub fn oracle() -> Self {
        SyntheticPolicy {
            bias: 0.0,
            noise_sigma: 0.0,
            format_error_rate: 0.0,
        }
    }
}

/// One recorded point of a hill-climbing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: u64,
    pub policy: SyntheticPolicy,
    pub mean_reward: f64,
    /// Spearman on the disjoint held-out dataset; `None` when undefined
    /// (e.g. every completion malformed or all predictions constant).
    pub heldout_spearman: Option<f64>,
}

/// Ordered record of a full run: entry 0 is the initial policy, entry t the
/// state after climbing step t.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn initial(&self) -> &TrajectoryPoint {
        self.points.first().expect("trajectory is never empty")
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory is never empty")
    }
}

/// Generates `2 * n_pairs` samples forming adjacent pairs: identical
/// synthetic sentences, distinct conditions, labels drawn over 1..=5 with
/// the first member holding the larger label. Deterministic under `seed`;
/// pair annotations come from running [`detect_pairs`] on the raw records.
pub fn generate_dataset(n_pairs: usize, seed: u64) -> Vec<Sample> {
    assert!(n_pairs >= 1, "need at least one pair");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DATASET));
    let mut raw = Vec::with_capacity(2 * n_pairs);
    for k in 0..n_pairs {
        let text1 = format!("A person carries out activity {k} near landmark {k}.");
        let text2 = format!("Someone is busy with activity {k} around landmark {k}.");
        let a: u8 = rng.random_range(1..=5);
        let b: u8 = rng.random_range(1..=5);
        let (high, low) = (a.max(b), a.min(b));
        raw.push(Sample {
            text1: text1.clone(),
            text2: text2.clone(),
            condition: "The kind of activity performed".into(),
            label: high,
            pair_id: None,
            pair_role: None,
        });
        raw.push(Sample {
            text1,
            text2,
            condition: "The exact spot where it happens".into(),
            label: low,
            pair_id: None,
            pair_role: None,
        });
    }
    detect_pairs(&raw)
}

/// Samples the policy's completion text for every (sample, completion)
/// cell. Deterministic under `seed`.
pub fn sample_policy_completions(
    policy: &SyntheticPolicy,
    samples: &[Sample],
    group_size: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    assert!(group_size >= 2, "the policy draws at least 2 completions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples
        .iter()
        .map(|sample| {
            (0..group_size)
                .map(|_| {
                    if policy.format_error_rate > 0.0 && rng.random_bool(policy.format_error_rate) {
                        return MALFORMED_COMPLETION.to_string();
                    }
                    let noise: f64 = rng.sample(StandardNormal);
                    let raw = sample.label as f64 + policy.bias + policy.noise_sigma * noise;
                    let score = raw.round().clamp(1.0, 5.0) as u8;
                    let judgment = if score >= 3 { "yes" } else { "no" };
                    format!("<answer>{judgment}({score})</answer>")
                })
                .collect()
        })
        .collect()
}

/// Mean total reward of the policy over the dataset under one stage, with
/// completions drawn from `eval_seed`. Samples are processed in consecutive
/// `sliceSize` batches.
pub fn mean_policy_reward(
    policy: &SyntheticPolicy,
    dataset: &[Sample],
    stage: crate::domain::Stage,
    config: &CurriculumConfig,
    eval_seed: u64,
) -> Result<f64> {
    let completions = sample_policy_completions(policy, dataset, config.group_size, eval_seed);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (batch, rows) in dataset
        .chunks(config.slice_size)
        .zip(completions.chunks(config.slice_size))
    {
        let parsed = rows
            .iter()
            .map(|row| row.iter().map(|t| parse_completion(t)).collect())
            .collect();
        let matrix = SliceMatrix::from_samples(batch, parsed)?;
        for row in compute_batch_rewards(&matrix, stage, config)? {
            for breakdown in row {
                sum += breakdown.total;
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}

/// Held-out Spearman: one completion per sample (a validation pass scores a
/// single output), invalid parses excluded; `None` when fewer than two
/// samples survive or the correlation is undefined.
pub fn heldout_spearman(
    policy: &SyntheticPolicy,
    heldout: &[Sample],
    config: &CurriculumConfig,
    eval_seed: u64,
) -> Option<f64> {
    let completions = sample_policy_completions(policy, heldout, config.group_size, eval_seed);
    let mut predictions = Vec::new();
    let mut golds = Vec::new();
    for (sample, row) in heldout.iter().zip(&completions) {
        if let Some(score) = parse_completion(&row[0]).score {
            predictions.push(f64::from(score));
            golds.push(sample.label as f64);
        }
    }
    if predictions.len() < 2 {
        return None;
    }
    spearman(&predictions, &golds).ok()
}

/// Coordinate hill climbing of the policy against the curriculum rewards.
///
/// Each step proposes one-coordinate neighbors (bias ±0.25, noiseSigma
/// ±0.25, formatErrorRate ±0.1, clamped to valid ranges), evaluates every
/// candidate on the step's common seed under the stage given by `stage_at`,
/// and accepts the best strict improvement; ties keep the incumbent. Entry
/// 0 of the trajectory records the initial policy.
pub fn hill_climb(
    initial: SyntheticPolicy,
    dataset: &[Sample],
    config: &CurriculumConfig,
    iterations: u64,
    seed: u64,
) -> Result<Trajectory> {
    config.validate()?;
    SyntheticPolicy::new(initial.bias, initial.noise_sigma, initial.format_error_rate)?;
    if iterations < 1 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    if dataset.len() < config.slice_size {
        return Err(Error::Config(format!(
            "dataset has {} samples but sliceSize is {}",
            dataset.len(),
            config.slice_size
        )));
    }
    if iterations > config.stage1_steps && dataset.len() % config.slice_size == 1 {
        return Err(Error::Config(format!(
            "dataset of {} samples leaves a tail batch of 1, which cannot be slice-ranked",
            dataset.len()
        )));
    }

    let heldout = generate_dataset(
        (dataset.len() / 2).max(1),
        derive_seed(seed, STREAM_HELDOUT_DATASET),
    );

    let mut current = initial;
    let mut points = Vec::with_capacity(iterations as usize + 1);
    let initial_reward = mean_policy_reward(
        &current,
        dataset,
        stage_at(0, config),
        config,
        derive_seed(seed, STREAM_EVAL_BASE),
    )?;
    points.push(TrajectoryPoint {
        iteration: 0,
        policy: current,
        mean_reward: initial_reward,
        heldout_spearman: heldout_spearman(
            &current,
            &heldout,
            config,
            derive_seed(seed, STREAM_HELDOUT_EVAL_BASE),
        ),
    });

    for step in 0..iterations {
        let stage = stage_at(step, config);
        let eval_seed = derive_seed(seed, STREAM_EVAL_BASE + step);
        let mut best_policy = current;
        let mut best_reward = mean_policy_reward(&current, dataset, stage, config, eval_seed)?;
        for candidate in neighbors(&current) {
            let reward = mean_policy_reward(&candidate, dataset, stage, config, eval_seed)?;
            if reward > best_reward {
                best_policy = candidate;
                best_reward = reward;
            }
        }
        current = best_policy;
        points.push(TrajectoryPoint {
            iteration: step + 1,
            policy: current,
            mean_reward: best_reward,
            heldout_spearman: heldout_spearman(
                &current,
                &heldout,
                config,
                derive_seed(seed, STREAM_HELDOUT_EVAL_BASE + step + 1),
            ),
        });
    }

    Ok(Trajectory { points })
}

/// One-coordinate neighbor proposals, in a fixed order.
fn neighbors(policy: &SyntheticPolicy) -> Vec<SyntheticPolicy> {
    const BIAS_STEP: f64 = 0.25;
    const SIGMA_STEP: f64 = 0.25;
    const FER_STEP: f64 = 0.1;
    vec![
        SyntheticPolicy {
            bias: policy.bias + BIAS_STEP,
            ..*policy
        },
        SyntheticPolicy {
            bias: policy.bias - BIAS_STEP,
            ..*policy
        },
        SyntheticPolicy {
            noise_sigma: policy.noise_sigma + SIGMA_STEP,
            ..*policy
        },
        SyntheticPolicy {
            noise_sigma: (policy.noise_sigma - SIGMA_STEP).max(0.0),
            ..*policy
        },
        SyntheticPolicy {
            format_error_rate: (policy.format_error_rate + FER_STEP).min(1.0),
            ..*policy
        },
        SyntheticPolicy {
            format_error_rate: (policy.format_error_rate - FER_STEP).max(0.0),
            ..*policy
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PairRole, Stage};

    fn small_config() -> CurriculumConfig {
        CurriculumConfig {
            slice_size: 4,
            group_size: 4,
            stage1_steps: 2,
            ..CurriculumConfig::default()
        }
    }

    #[test]
    fn dataset_is_deterministic_under_seed() {
        let a = generate_dataset(5, 7);
        let b = generate_dataset(5, 7);
        assert_eq!(a, b);
        let c = generate_dataset(5, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_pairs_are_detected_and_ordered() {
        let samples = generate_dataset(3, 1);
        assert_eq!(samples.len(), 6);
        let pairs = samples
            .iter()
            .filter(|s| s.pair_role == Some(PairRole::First))
            .count();
        assert_eq!(pairs, 3);
        for chunk in samples.chunks(2) {
            assert_eq!(chunk[0].pair_id, chunk[1].pair_id);
            assert!(chunk[0].label >= chunk[1].label);
            assert!(chunk[0].label.max(chunk[1].label) >= chunk[0].label.min(chunk[1].label));
        }
    }

    #[test]
    fn oracle_policy_reproduces_gold_labels() {
        let samples = generate_dataset(4, 3);
        let grid = sample_policy_completions(&SyntheticPolicy::oracle(), &samples, 4, 11);
        for (sample, row) in samples.iter().zip(&grid) {
            for text in row {
                let parsed = parse_completion(text);
                assert_eq!(parsed.score, Some(sample.label));
                assert!(parsed.consistent);
            }
        }
    }

    #[test]
    fn full_format_error_rate_makes_everything_unparseable() {
        let samples = generate_dataset(2, 3);
        let policy = SyntheticPolicy::new(0.0, 0.0, 1.0).unwrap();
        let grid = sample_policy_completions(&policy, &samples, 3, 11);
        for row in &grid {
            for text in row {
                assert!(!parse_completion(text).structurally_valid);
            }
        }
    }

    #[test]
    fn completion_sampling_is_deterministic() {
        let samples = generate_dataset(3, 9);
        let policy = SyntheticPolicy::new(0.3, 1.0, 0.2).unwrap();
        let a = sample_policy_completions(&policy, &samples, 4, 5);
        let b = sample_policy_completions(&policy, &samples, 4, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_is_a_fixed_point_with_perfect_heldout() {
        let dataset = generate_dataset(8, 21);
        let config = small_config();
        let t = hill_climb(SyntheticPolicy::oracle(), &dataset, &config, 4, 21).unwrap();
        assert_eq!(t.initial().heldout_spearman, Some(1.0));
        for point in &t.points {
            assert_eq!(point.policy, SyntheticPolicy::oracle());
            assert_eq!(point.heldout_spearman, Some(1.0));
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let dataset = generate_dataset(8, 2);
        let config = small_config();
        let start = SyntheticPolicy::new(0.5, 1.0, 0.2).unwrap();
        let a = hill_climb(start, &dataset, &config, 6, 33).unwrap();
        let b = hill_climb(start, &dataset, &config, 6, 33).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_so_far_reward_is_non_decreasing() {
        let dataset = generate_dataset(10, 4);
        let config = small_config();
        let start = SyntheticPolicy::new(-1.0, 1.5, 0.3).unwrap();
        let t = hill_climb(start, &dataset, &config, 8, 5).unwrap();
        let mut best = f64::NEG_INFINITY;
        for point in &t.points {
            let next_best = best.max(point.mean_reward);
            assert!(next_best >= best);
            best = next_best;
        }
    }

    #[test]
    fn zero_iterations_are_rejected() {
        let dataset = generate_dataset(8, 1);
        let config = small_config();
        assert!(matches!(
            hill_climb(SyntheticPolicy::oracle(), &dataset, &config, 0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dataset_smaller_than_slice_size_is_rejected() {
        let dataset = generate_dataset(1, 4);
        let config = CurriculumConfig::default(); // sliceSize 24 > 2 samples
        let start = SyntheticPolicy::oracle();
        assert!(matches!(
            hill_climb(start, &dataset, &config, 2, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lower_noise_never_scores_worse_on_stage1() {
        //  >= 500 samples, fixed seeds: reward fidelity of the noise axis.
        let dataset = generate_dataset(250, 17);
        let config = CurriculumConfig {
            group_size: 2,
            ..small_config()
        };
        let quiet = SyntheticPolicy::new(0.0, 0.3, 0.0).unwrap();
        let noisy = SyntheticPolicy::new(0.0, 2.0, 0.0).unwrap();
        let r_quiet = mean_policy_reward(&quiet, &dataset, Stage::One, &config, 99).unwrap();
        let r_noisy = mean_policy_reward(&noisy, &dataset, Stage::One, &config, 99).unwrap();
        assert!(r_quiet >= r_noisy);
    }

    #[test]
    fn same_sample_completions_split_on_slice_rank_error_alone() {
        // Sample 0's two completions (scores 2 and 4 against label 3) tie on
        // pointwise and are unpaired, yet land in slices with different rank
        // errors; their totals must differ.
        use crate::domain::{Judgment, ParsedPrediction};
        let rows = vec![
            vec![
                ParsedPrediction::valid(Judgment::No, 2),
                ParsedPrediction::valid(Judgment::Yes, 4),
            ],
            vec![
                ParsedPrediction::valid(Judgment::No, 1),
                ParsedPrediction::valid(Judgment::Yes, 5),
            ],
        ];
        let matrix = SliceMatrix::new(rows, vec![3, 1], vec![false, false]).unwrap();
        let grid =
            compute_batch_rewards(&matrix, Stage::Two, &CurriculumConfig::default()).unwrap();
        let (a, b) = (grid[0][0], grid[0][1]);
        assert_eq!(a.pointwise, b.pointwise);
        assert_eq!(a.pairwise, None);
        assert_eq!(b.pairwise, None);
        assert_ne!(a.listwise, b.listwise);
        assert_ne!(a.total, b.total);
    }

    #[test]
    fn stage2_totals_differ_when_only_rank_errors_differ() {
        // Two samples, no pairs, same pointwise distance to their labels but
        // different slice rank errors: the slice reward must split them.
        use crate::domain::ParsedPrediction;
        let labels = vec![2, 4, 5];
        let rows = vec![
            vec![ParsedPrediction::valid(crate::domain::Judgment::Yes, 3)],
            vec![ParsedPrediction::valid(crate::domain::Judgment::Yes, 5)],
            vec![ParsedPrediction::valid(crate::domain::Judgment::Yes, 4)],
        ];
        let matrix = SliceMatrix::new(rows, labels, vec![false; 3]).unwrap();
        let config = CurriculumConfig::default();
        let grid = compute_batch_rewards(&matrix, Stage::Two, &config).unwrap();
        // Samples 0 and 1 both miss their label by 1 (same pointwise), and
        // neither is paired, yet their totals differ via the listwise term.
        assert_eq!(grid[0][0].pointwise, grid[1][0].pointwise);
        assert_eq!(grid[0][0].pairwise, None);
        assert_eq!(grid[1][0].pairwise, None);
        assert_ne!(grid[0][0].total, grid[1][0].total);
    }
}
