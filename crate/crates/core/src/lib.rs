//! Reward and advantage engine for conditional semantic textual similarity
//! scoring trained with reinforcement learning.
//!
//! Two sentences are judged under an explicit natural-language condition on
//! a 1-5 Likert scale. A policy emits G completions per sample; this crate
//! turns those completions into training signals:
//!
//! - [`parser`] extracts the `<answer>{yes|no}(k)</answer>` verdict;
//! - [`stage1`] grades pointwise accuracy, the binary judgment, and format;
//! - [`ranking`] organizes a batch into parallel slices and grades each
//!   completion's pairwise and listwise ranking quality within its slice;
//! - [`curriculum`] schedules the two stages and scores whole batches;
//! - [`advantage`] Z-scores rewards within each sample's completion group
//!   and exposes the token-level surrogate objective value;
//! - [`metrics`] provides Spearman/Pearson and the error histogram;
//! - [`simulator`] closes the loop without a language model, hill-climbing
//!   a synthetic policy against the engine's own rewards;
//! - [`cli`] and [`records`] bind everything into a file pipeline.

pub mod advantage;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod domain;
pub mod error;
pub mod metrics;
pub mod parser;
pub mod prompt;
pub mod ranking;
pub mod records;
pub mod simulator;
pub mod stage1;

pub use config::CurriculumConfig;
pub use domain::{
    detect_pairs, Judgment, PairRole, ParsedPrediction, RewardBreakdown, Sample, SliceMatrix, Stage,
};
pub use error::{Error, Result};
