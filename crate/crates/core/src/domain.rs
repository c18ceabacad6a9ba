//! Shared data model: samples, parsed predictions, reward breakdowns, and
//! the N x G completion grid that the slice rewards operate on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the similarity label space.
pub const LABEL_MIN: u8 = 1;
/// Upper bound of the similarity label space.
pub const LABEL_MAX: u8 = 5;

/// Binary similarity judgment extracted from a completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Yes,
    No,
}

/// Position of a sample within its detected pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRole {
    First,
    Second,
}

/// One conditional-similarity record: two sentences, the condition under
/// which they are compared, and a 1-5 Likert label. `pair_id`/`pair_role`
/// are filled by [`detect_pairs`] for adjacent records that share both
/// sentences verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(rename = "sentence1")]
    pub text1: String,
    #[serde(rename = "sentence2")]
    pub text2: String,
    pub condition: String,
    pub label: u8,
    #[serde(rename = "pairId", skip_serializing_if = "Option::is_none", default)]
    pub pair_id: Option<u64>,
    #[serde(rename = "pairRole", skip_serializing_if = "Option::is_none", default)]
    pub pair_role: Option<PairRole>,
}

impl Sample {
    /// Builds a sample, rejecting labels outside 1..=5.
    pub fn new(
        text1: impl Into<String>,
        text2: impl Into<String>,
        condition: impl Into<String>,
        label: u8,
    ) -> Result<Self> {
        if !(LABEL_MIN..=LABEL_MAX).contains(&label) {
            return Err(Error::Range(format!(
                "label must be an integer in {LABEL_MIN}..={LABEL_MAX}, got {label}"
            )));
        }
        Ok(Sample {
            text1: text1.into(),
            text2: text2.into(),
            condition: condition.into(),
            label,
            pair_id: None,
            pair_role: None,
        })
    }
}

/// Links adjacent records that share both sentences byte-for-byte but
/// differ in condition. Greedy left-to-right, non-overlapping: in a run of
/// three candidates the first two pair up and the third stays single.
/// Existing pair annotations are discarded and recomputed, so the scan is
/// idempotent. Unpaired records are legal and keep `pair_id = None`.
pub fn detect_pairs(samples: &[Sample]) -> Vec<Sample> {
    let mut out: Vec<Sample> = samples
        .iter()
        .map(|s| Sample {
            pair_id: None,
            pair_role: None,
            ..s.clone()
        })
        .collect();
    let mut next_id = 0u64;
    let mut i = 0;
    while i + 1 < out.len() {
        let same_texts = out[i].text1 == out[i + 1].text1 && out[i].text2 == out[i + 1].text2;
        let differing_conditions = out[i].condition != out[i + 1].condition;
        if same_texts && differing_conditions {
            out[i].pair_id = Some(next_id);
            out[i].pair_role = Some(PairRole::First);
            out[i + 1].pair_id = Some(next_id);
            out[i + 1].pair_role = Some(PairRole::Second);
            next_id += 1;
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

/// Structured result of parsing one completion. `consistent` is meaningful
/// only when `structurally_valid` (a "yes" belongs with scores >= 3, a "no"
/// with scores <= 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedPrediction {
    pub judgment: Option<Judgment>,
    pub score: Option<u8>,
    pub structurally_valid: bool,
    pub consistent: bool,
}

impl ParsedPrediction {
    /// The well-typed result for malformed input: no fields, not valid.
    pub fn invalid() -> Self {
        ParsedPrediction {
            judgment: None,
            score: None,
            structurally_valid: false,
            consistent: false,
        }
    }

    /// A structurally valid prediction; computes band consistency.
    pub fn valid(judgment: Judgment, score: u8) -> Self {
        assert!(
            (LABEL_MIN..=LABEL_MAX).contains(&score),
            "valid predictions carry a score in 1..=5"
        );
        let consistent = match judgment {
            Judgment::Yes => score >= 3,
            Judgment::No => score <= 2,
        };
        ParsedPrediction {
            judgment: Some(judgment),
            score: Some(score),
            structurally_valid: true,
            consistent,
        }
    }
}

/// Curriculum stage. Stage one rewards pointwise accuracy, the binary
/// judgment, and output format; stage two rewards pointwise accuracy plus
/// the pairwise and listwise ranking signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    One,
    Two,
}

impl From<Stage> for u8 {
    fn from(stage: Stage) -> u8 {
        match stage {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, String> {
        match value {
            1 => Ok(Stage::One),
            2 => Ok(Stage::Two),
            other => Err(format!("stage must be 1 or 2, got {other}")),
        }
    }
}

/// Per-completion component rewards plus the weighted total. Components
/// that were not live for this completion (e.g. pairwise on an unpaired
/// sample) are `None` and contribute nothing to the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pointwise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub binary: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub format: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pairwise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub listwise: Option<f64>,
    pub total: f64,
    pub stage: Stage,
}

/// The N x G grid of parsed completions for one batch: N samples, G
/// completions each, plus the labels and pair links the ranking rewards
/// need. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SliceMatrix {
    cells: Vec<ParsedPrediction>, // row-major: sample-major order
    labels: Vec<u8>,
    pair_first: Vec<bool>,
    n_samples: usize,
    group_size: usize,
}

impl SliceMatrix {
    /// Builds a matrix from per-sample completion rows. `pair_first[i]`
    /// marks that samples i and i+1 form a valid pair.
    pub fn new(
        rows: Vec<Vec<ParsedPrediction>>,
        labels: Vec<u8>,
        pair_first: Vec<bool>,
    ) -> Result<Self> {
        let n_samples = rows.len();
        if n_samples == 0 {
            return Err(Error::Config("a batch needs at least one sample".into()));
        }
        let group_size = rows[0].len();
        if group_size == 0 {
            return Err(Error::Config(
                "each sample needs at least one completion".into(),
            ));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != group_size) {
            return Err(Error::Config(format!(
                "ragged completion grid: sample {bad} has {} completions, expected {group_size}",
                rows[bad].len()
            )));
        }
        if labels.len() != n_samples {
            return Err(Error::Config(format!(
                "labels length {} does not match sample count {n_samples}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|l| !(LABEL_MIN..=LABEL_MAX).contains(l)) {
            return Err(Error::Range(format!(
                "label must be an integer in {LABEL_MIN}..={LABEL_MAX}, got {bad}"
            )));
        }
        if pair_first.len() != n_samples {
            return Err(Error::Config(format!(
                "pair mask length {} does not match sample count {n_samples}",
                pair_first.len()
            )));
        }
        for i in 0..n_samples {
            if pair_first[i] {
                if i + 1 >= n_samples {
                    return Err(Error::Config(format!(
                        "sample {i} is marked as pair start but has no successor"
                    )));
                }
                if pair_first[i + 1] {
                    return Err(Error::Config(format!(
                        "samples {i} and {} cannot both start a pair",
                        i + 1
                    )));
                }
            }
        }
        let cells = rows.into_iter().flatten().collect();
        Ok(SliceMatrix {
            cells,
            labels,
            pair_first,
            n_samples,
            group_size,
        })
    }

    /// Builds a matrix for a batch of samples, deriving the pair mask from
    /// their `pair_id`/`pair_role` annotations. Pairs straddling the batch
    /// boundary are treated as unpaired.
    pub fn from_samples(samples: &[Sample], rows: Vec<Vec<ParsedPrediction>>) -> Result<Self> {
        if rows.len() != samples.len() {
            return Err(Error::Config(format!(
                "completion grid has {} rows but the batch has {} samples",
                rows.len(),
                samples.len()
            )));
        }
        let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
        let mut pair_first = vec![false; samples.len()];
        for i in 0..samples.len() {
            if i + 1 < samples.len()
                && samples[i].pair_role == Some(PairRole::First)
                && samples[i].pair_id.is_some()
                && samples[i].pair_id == samples[i + 1].pair_id
                && samples[i + 1].pair_role == Some(PairRole::Second)
            {
                pair_first[i] = true;
            }
        }
        SliceMatrix::new(rows, labels, pair_first)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn cell(&self, sample: usize, completion: usize) -> &ParsedPrediction {
        assert!(sample < self.n_samples && completion < self.group_size);
        &self.cells[sample * self.group_size + completion]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// `true` at index i when samples i and i+1 form a valid pair.
    pub fn pair_first(&self) -> &[bool] {
        &self.pair_first
    }
}
