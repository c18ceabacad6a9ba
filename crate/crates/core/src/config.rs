//! Curriculum configuration: stage weights, slice geometry, and defaults.
//!
//! The on-disk format is TOML with four sections (`stage1`, `stage2`,
//! `psrr`, `advantage`). Every key is optional; absent keys take the
//! documented defaults, and an empty document validates to the full
//! default configuration.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Full configuration for the two-stage reward curriculum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    /// Stage-I component weights (pointwise, binary, format).
    pub stage1_weights: [f64; 3],
    /// Stage-II component weights (pointwise, pairwise, listwise).
    pub stage2_weights: [f64; 3],
    /// Base pairwise reward granted when the predicted ordering is correct.
    pub base_reward: f64,
    /// Normalizer for the pairwise difference error; 3 is the largest
    /// possible |delta_pred - delta_true| once the sign gate has passed.
    pub max_error: f64,
    /// Samples per parallel slice (N).
    pub slice_size: usize,
    /// Completions generated per sample (G).
    pub group_size: usize,
    /// Denominator guard for advantage normalization.
    pub epsilon: f64,
    /// Training steps spent in Stage I before switching to Stage II.
    pub stage1_steps: u64,
    /// Terminal-reward discount factor. Fixed at 1: per-token coefficients
    /// assume the terminal reward reaches every token undecayed.
    pub gamma: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            stage1_weights: [1.0, 0.5, 0.5],
            stage2_weights: [1.0, 1.5, 1.0],
            base_reward: 0.5,
            max_error: 3.0,
            slice_size: 24,
            group_size: 8,
            epsilon: 1e-4,
            stage1_steps: 100,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    stage1: Stage1Section,
    #[serde(default)]
    stage2: Stage2Section,
    #[serde(default)]
    psrr: SliceSection,
    #[serde(default)]
    advantage: AdvantageSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Stage1Section {
    #[serde(rename = "stage1Weights")]
    stage1_weights: Option<[f64; 3]>,
    #[serde(rename = "stage1Steps")]
    stage1_steps: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Stage2Section {
    #[serde(rename = "stage2Weights")]
    stage2_weights: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceSection {
    #[serde(rename = "baseReward")]
    base_reward: Option<f64>,
    #[serde(rename = "maxError")]
    max_error: Option<f64>,
    #[serde(rename = "sliceSize")]
    slice_size: Option<usize>,
    #[serde(rename = "groupSize")]
    group_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvantageSection {
    epsilon: Option<f64>,
    gamma: Option<f64>,
}

impl CurriculumConfig {
    /// Parses a TOML document, fills defaults for absent keys, and
    /// validates the result.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config file: {e}")))?;
        let defaults = CurriculumConfig::default();
        let config = CurriculumConfig {
            stage1_weights: file
                .stage1
                .stage1_weights
                .unwrap_or(defaults.stage1_weights),
            stage1_steps: file.stage1.stage1_steps.unwrap_or(defaults.stage1_steps),
            stage2_weights: file
                .stage2
                .stage2_weights
                .unwrap_or(defaults.stage2_weights),
            base_reward: file.psrr.base_reward.unwrap_or(defaults.base_reward),
            max_error: file.psrr.max_error.unwrap_or(defaults.max_error),
            slice_size: file.psrr.slice_size.unwrap_or(defaults.slice_size),
            group_size: file.psrr.group_size.unwrap_or(defaults.group_size),
            epsilon: file.advantage.epsilon.unwrap_or(defaults.epsilon),
            gamma: file.advantage.gamma.unwrap_or(defaults.gamma),
        };
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Checks every invariant, returning a descriptive error for the first
    /// violation found.
    pub fn validate(&self) -> Result<()> {
        check_weights("stage1Weights", &self.stage1_weights)?;
        check_weights("stage2Weights", &self.stage2_weights)?;
        if !self.base_reward.is_finite() || !(0.0..1.0).contains(&self.base_reward) {
            return Err(Error::Config(format!(
                "baseReward must be in [0, 1), got {}",
                self.base_reward
            )));
        }
        if !self.max_error.is_finite() || self.max_error <= 0.0 {
            return Err(Error::Config(format!(
                "maxError must be positive, got {}",
                self.max_error
            )));
        }
        if self.slice_size < 2 {
            return Err(Error::Config(format!(
                "sliceSize must be at least 2 (rank normalizer is N-1), got {}",
                self.slice_size
            )));
        }
        if self.group_size < 2 {
            return Err(Error::Config(format!(
                "groupSize must be at least 2 (advantages normalize within a group), got {}",
                self.group_size
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.gamma != 1.0 {
            return Err(Error::Config(format!(
                "gamma is fixed at 1 (terminal reward, undecayed), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

fn check_weights(name: &str, weights: &[f64; 3]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config(format!(
            "{name} must be non-negative finite reals, got {weights:?}"
        )));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::Config(format!(
            "{name} needs at least one positive weight, got {weights:?}"
        )));
    }
    Ok(())
}
