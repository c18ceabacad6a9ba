//! Group-relative advantage normalization, the surrogate objective value,
//! and sub-batch accumulation planning.
//!
//! Advantages are Z-scores of a completion's reward against the other
//! completions of the *same sample*: `(r_i - mean) / (pop_std + eps)`. No
//! value function is involved. The objective helper mirrors the DAPO-style
//! token-length-normalized surrogate at importance ratio 1. This crate
//! computes values and per-token coefficients only; differentiation belongs
//! to the host trainer.

use crate::error::{Error, Result};
use std::ops::Range;

/// Rewards and Z-score advantages for one sample's completion group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageGroup {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub epsilon: f64,
}

impl AdvantageGroup {
    pub fn new(rewards: Vec<f64>, epsilon: f64) -> Self {
        let advantages = group_advantages(&rewards, epsilon);
        AdvantageGroup {
            rewards,
            advantages,
            epsilon,
        }
    }
}

/// Z-score normalization of one group's rewards. The standard deviation is
/// the population one (divide by G), and `epsilon` keeps all-equal groups
/// at exactly zero instead of NaN.
pub fn group_advantages(rewards: &[f64], epsilon: f64) -> Vec<f64> {
    assert!(
        rewards.len() >= 2,
        "an advantage group needs at least 2 completions, got {}",
        rewards.len()
    );
    assert!(epsilon > 0.0, "epsilon must be positive");
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g;
    let denominator = variance.sqrt() + epsilon;
    rewards.iter().map(|r| (r - mean) / denominator).collect()
}

/// Token-length-normalized objective value and per-token coefficients.
///
/// On-policy, the importance ratio is identically 1 in value (its
/// denominator is gradient-stopped, not different), so the objective
/// reduces to `sum(|o_i| * A_i) / sum(|o_i|)`. The reward is terminal and
/// undecayed, so every token of completion i carries the same coefficient
/// `A_i`; the host multiplies these into its per-token log-prob gradients.
pub fn dapo_objective(advantages: &[f64], token_counts: &[usize]) -> (f64, Vec<Vec<f64>>) {
    assert_eq!(
        advantages.len(),
        token_counts.len(),
        "advantages and token counts must align"
    );
    assert!(!advantages.is_empty(), "need at least one completion");
    assert!(
        token_counts.iter().all(|&c| c >= 1),
        "token counts must be at least 1"
    );
    let total_tokens: usize = token_counts.iter().sum();
    let weighted: f64 = advantages
        .iter()
        .zip(token_counts)
        .map(|(a, &c)| a * c as f64)
        .sum();
    let per_token = advantages
        .iter()
        .zip(token_counts)
        .map(|(&a, &c)| vec![a; c])
        .collect();
    (weighted / total_tokens as f64, per_token)
}

/// Contiguous sub-batch ranges covering `0..total_completions` exactly
/// once. Rewards and advantages are computed globally over the full batch
/// *before* any pass runs; the plan only sequences the forward/backward
/// work so large slices fit in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulationPlan {
    pub total_completions: usize,
    pub sub_batch_size: usize,
    pub passes: Vec<Range<usize>>,
}

/// Plans ceil(total / sub_batch) contiguous passes, all of `sub_batch_size`
/// except possibly the last.
pub fn plan_accumulation(total_completions: usize, sub_batch_size: usize) -> AccumulationPlan {
    assert!(
        total_completions >= 1,
        "nothing to plan for zero completions"
    );
    assert!(sub_batch_size >= 1, "sub-batch size must be at least 1");
    let mut passes = Vec::new();
    let mut start = 0;
    while start < total_completions {
        let end = (start + sub_batch_size).min(total_completions);
        passes.push(start..end);
        start = end;
    }
    AccumulationPlan {
        total_completions,
        sub_batch_size,
        passes,
    }
}

/// Groups a flat reward list into per-sample advantage groups of size G.
/// Errors if the list does not divide evenly.
pub fn advantages_for_flat_rewards(
    rewards: &[f64],
    group_size: usize,
    epsilon: f64,
) -> Result<Vec<AdvantageGroup>> {
    if group_size < 2 {
        return Err(Error::Config(format!(
            "groupSize must be at least 2, got {group_size}"
        )));
    }
    if rewards.is_empty() || !rewards.len().is_multiple_of(group_size) {
        return Err(Error::Shape(format!(
            "expected a multiple of {group_size} rewards, found {}",
            rewards.len()
        )));
    }
    Ok(rewards
        .chunks(group_size)
        .map(|chunk| AdvantageGroup::new(chunk.to_vec(), epsilon))
        .collect())
}
