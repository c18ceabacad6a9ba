//! Line-delimited record schemas and readers/writers for the file pipeline.
//!
//! Every pipeline file is UTF-8 JSON Lines: one JSON object per line, blank
//! lines ignored. Indices are 0-based. Field names are part of the wire
//! contract and never change with the Rust struct names.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{PairRole, RewardBreakdown, Sample};
use crate::error::{Error, Result};
use crate::metrics::ErrorHistogram;
use crate::simulator::TrajectoryPoint;

/// One completion of one sample. `tokenCount` is optional and simply
/// echoed through the reward and advantage records when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    #[serde(rename = "sampleIndex")]
    pub sample_index: u64,
    #[serde(rename = "completionIndex")]
    pub completion_index: u64,
    pub text: String,
    #[serde(
        rename = "tokenCount",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub token_count: Option<u64>,
}

/// Reward breakdown for one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    #[serde(rename = "sampleIndex")]
    pub sample_index: u64,
    #[serde(rename = "completionIndex")]
    pub completion_index: u64,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
    #[serde(
        rename = "tokenCount",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub token_count: Option<u64>,
}

/// Group-normalized advantage for one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    #[serde(rename = "sampleIndex")]
    pub sample_index: u64,
    #[serde(rename = "completionIndex")]
    pub completion_index: u64,
    pub reward: f64,
    pub advantage: f64,
    #[serde(
        rename = "tokenCount",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub token_count: Option<u64>,
}

/// Rendered prompt for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    #[serde(rename = "sampleIndex")]
    pub sample_index: u64,
    pub prompt: String,
}

/// One hill-climbing trajectory entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: u64,
    pub bias: f64,
    #[serde(rename = "noiseSigma")]
    pub noise_sigma: f64,
    #[serde(rename = "formatErrorRate")]
    pub format_error_rate: f64,
    #[serde(rename = "meanReward")]
    pub mean_reward: f64,
    #[serde(rename = "heldoutSpearman")]
    pub heldout_spearman: Option<f64>,
}

impl From<&TrajectoryPoint> for TrajectoryRecord {
    fn from(point: &TrajectoryPoint) -> Self {
        TrajectoryRecord {
            iteration: point.iteration,
            bias: point.policy.bias,
            noise_sigma: point.policy.noise_sigma,
            format_error_rate: point.policy.format_error_rate,
            mean_reward: point.mean_reward,
            heldout_spearman: point.heldout_spearman,
        }
    }
}

/// A flat per-sample prediction, the alternative evaluation input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatPredictionRecord {
    #[serde(rename = "sampleIndex")]
    pub sample_index: u64,
    pub score: u8,
}

/// Evaluation report written by the `evaluate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(rename = "spearmanX100")]
    pub spearman_x100: f64,
    #[serde(rename = "pearsonX100")]
    pub pearson_x100: f64,
    pub histogram: ErrorHistogram,
    pub evaluated: u64,
    pub excluded: u64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Reads any JSONL record type, reporting the 1-based line number on the
/// first malformed line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("line {}: {e}", idx + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Writes records as one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = create(path)?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("record types always serialize");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a dataset file, validating each record by hand so schema errors
/// name the missing/ill-typed field and the offending line.
pub fn read_dataset(path: &Path) -> Result<Vec<Sample>> {
    let file = open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(sample_from_json_line(&line, idx + 1)?);
    }
    Ok(out)
}

fn sample_from_json_line(line: &str, line_no: usize) -> Result<Sample> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Error::Schema(format!("line {line_no}: not valid JSON: {e}")))?;
    let object = value
        .as_object()
        .ok_or_else(|| Error::Schema(format!("line {line_no}: record must be a JSON object")))?;

    let text_field = |field: &str| -> Result<String> {
        match object.get(field) {
            None => Err(Error::Schema(format!(
                "line {line_no}: missing field `{field}`"
            ))),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(Error::Schema(format!(
                "line {line_no}: field `{field}` must be a string, got {other}"
            ))),
        }
    };

    let text1 = text_field("sentence1")?;
    let text2 = text_field("sentence2")?;
    let condition = text_field("condition")?;

    let label = match object.get("label") {
        None => {
            return Err(Error::Schema(format!(
                "line {line_no}: missing field `label`"
            )))
        }
        Some(value) => match value.as_i64() {
            Some(l) if (1..=5).contains(&l) => l as u8,
            _ => {
                return Err(Error::Range(format!(
                    "line {line_no}: label must be an integer in 1..=5, got {value}"
                )))
            }
        },
    };

    let mut sample = Sample::new(text1, text2, condition, label)?;

    if let Some(value) = object.get("pairId") {
        sample.pair_id = Some(value.as_u64().ok_or_else(|| {
            Error::Schema(format!(
                "line {line_no}: field `pairId` must be a non-negative integer, got {value}"
            ))
        })?);
    }
    if let Some(value) = object.get("pairRole") {
        sample.pair_role = Some(match value.as_str() {
            Some("first") => PairRole::First,
            Some("second") => PairRole::Second,
            _ => {
                return Err(Error::Schema(format!(
                    "line {line_no}: field `pairRole` must be \"first\" or \"second\", got {value}"
                )))
            }
        });
    }
    Ok(sample)
}
