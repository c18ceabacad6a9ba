//! Command-line surface: dataset ingestion, prompt rendering, completion
//! scoring, advantage export, evaluation, and the closed-loop simulator.
//!
//! Exit codes are a fixed contract for scripting: 0 success, 1 validation
//! error (bad records, bad config, bad shapes), 2 I/O error.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::advantage::group_advantages;
use crate::config::CurriculumConfig;
use crate::curriculum::{compute_batch_rewards, stage_at};
use crate::domain::{detect_pairs, PairRole, Sample, SliceMatrix, Stage};
use crate::error::{Error, Result};
use crate::metrics::{error_histogram, pearson, spearman};
use crate::parser::parse_completion;
use crate::prompt::render_prompt;
use crate::records::{
    read_dataset, read_jsonl, write_jsonl, AdvantageRecord, CompletionRecord, EvaluationReport,
    FlatPredictionRecord, PromptRecord, RewardRecord, TrajectoryRecord,
};
use crate::simulator::{generate_dataset, hill_climb, SyntheticPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "csts-reward",
    version,
    about = "Reward and advantage engine for conditional similarity scoring"
)]
pub struct Cli {
    /// Curriculum configuration file (TOML); defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for the seeded commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Force the curriculum stage, overriding the step schedule.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: Option<u8>,

    /// Output file for commands that emit records.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset and annotate adjacent sample pairs.
    Ingest {
        /// Dataset file (JSONL: sentence1, sentence2, condition, label).
        dataset: PathBuf,
    },
    /// Render the scoring prompt for every sample.
    RenderPrompts { dataset: PathBuf },
    /// Score a completions file against its dataset.
    Score {
        /// Pair-annotated dataset the completions answer.
        #[arg(long, value_name = "PATH")]
        dataset: PathBuf,
        /// Training step used to pick the stage (see stage1Steps).
        #[arg(long, default_value_t = 0)]
        step: u64,
        /// Completions file (JSONL: sampleIndex, completionIndex, text).
        completions: PathBuf,
    },
    /// Z-score a rewards file into group-relative advantages.
    Advantage { rewards: PathBuf },
    /// Correlation metrics and error histogram for a predictions file.
    Evaluate {
        /// Dataset carrying the gold labels.
        #[arg(long, value_name = "PATH")]
        dataset: PathBuf,
        /// Completion records and/or flat {sampleIndex, score} records.
        predictions: PathBuf,
    },
    /// Hill-climb a synthetic policy against the curriculum rewards.
    Simulate {
        /// Sample pairs in the seeded training dataset.
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        /// Hill-climbing iterations.
        #[arg(long, default_value_t = 60)]
        iterations: u64,
        /// Initial systematic score shift.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        bias: f64,
        /// Initial score noise (standard deviation).
        #[arg(long, default_value_t = 2.0)]
        noise_sigma: f64,
        /// Initial probability of emitting a malformed completion.
        #[arg(long, default_value_t = 0.3)]
        format_error_rate: f64,
    },
}

/// Resolved inputs for a scoring run. Referenced paths are checked before
/// any work starts.
#[derive(Debug)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub dataset_path: PathBuf,
    pub completions_path: PathBuf,
    pub output_path: PathBuf,
    pub stage_override: Option<Stage>,
    pub seed: u64,
}

impl RunManifest {
    pub fn validate_paths(&self) -> Result<()> {
        let mut required = vec![&self.dataset_path, &self.completions_path];
        if let Some(config) = &self.config_path {
            required.push(config);
        }
        for path in required {
            if !path.exists() {
                return Err(Error::Io(std::io::Error::new(
                    ErrorKind::NotFound,
                    format!("{}: no such file", path.display()),
                )));
            }
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let stage_override = cli
        .stage
        .map(|s| Stage::try_from(s).expect("clap ranged 1..=2"));
    match cli.command {
        Command::Ingest { dataset } => {
            cmd_ingest(&dataset, &require_output(cli.output.as_deref())?)
        }
        Command::RenderPrompts { dataset } => {
            cmd_render_prompts(&dataset, &require_output(cli.output.as_deref())?)
        }
        Command::Score {
            dataset,
            step,
            completions,
        } => {
            let manifest = RunManifest {
                config_path: cli.config.clone(),
                dataset_path: dataset,
                completions_path: completions,
                output_path: require_output(cli.output.as_deref())?,
                stage_override,
                seed: cli.seed,
            };
            cmd_score(&manifest, &config, step)
        }
        Command::Advantage { rewards } => {
            cmd_advantage(&rewards, &config, &require_output(cli.output.as_deref())?)
        }
        Command::Evaluate {
            dataset,
            predictions,
        } => cmd_evaluate(&predictions, &dataset, cli.output.as_deref()),
        Command::Simulate {
            pairs,
            iterations,
            bias,
            noise_sigma,
            format_error_rate,
        } => {
            let policy = SyntheticPolicy::new(bias, noise_sigma, format_error_rate)?;
            // A stage override pins the whole run to one stage by rewriting
            // the schedule budget.
            let mut config = config;
            match stage_override {
                Some(Stage::One) => config.stage1_steps = u64::MAX,
                Some(Stage::Two) => config.stage1_steps = 0,
                None => {}
            }
            cmd_simulate(
                policy,
                pairs,
                iterations,
                cli.seed,
                &config,
                &require_output(cli.output.as_deref())?,
            )
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<CurriculumConfig> {
    match path {
        Some(path) => CurriculumConfig::load(path),
        None => Ok(CurriculumConfig::default()),
    }
}

fn require_output(output: Option<&Path>) -> Result<PathBuf> {
    output
        .map(Path::to_path_buf)
        .ok_or_else(|| Error::Config("this command requires --output <path>".into()))
}

fn cmd_ingest(dataset_path: &Path, output: &Path) -> Result<()> {
    let samples = read_dataset(dataset_path)?;
    let annotated = detect_pairs(&samples);
    let pairs = annotated
        .iter()
        .filter(|s| s.pair_role == Some(PairRole::First))
        .count();
    let unpaired = annotated.iter().filter(|s| s.pair_id.is_none()).count();
    write_jsonl(output, &annotated)?;
    println!(
        "{} samples, {} pairs, {} unpaired",
        annotated.len(),
        pairs,
        unpaired
    );
    Ok(())
}

fn cmd_render_prompts(dataset_path: &Path, output: &Path) -> Result<()> {
    let samples = read_dataset(dataset_path)?;
    let prompts: Vec<PromptRecord> = samples
        .iter()
        .enumerate()
        .map(|(i, sample)| PromptRecord {
            sample_index: i as u64,
            prompt: render_prompt(sample),
        })
        .collect();
    write_jsonl(output, &prompts)?;
    println!("rendered {} prompts", prompts.len());
    Ok(())
}

/// The text and optional token count of one grid cell.
type CompletionCell = (String, Option<u64>);

/// Arranges completion records into a dense N x G grid, rejecting missing,
/// duplicate, or out-of-range cells with an expected-vs-found message.
pub fn assemble_grid(
    records: &[CompletionRecord],
    n_samples: usize,
    group_size: usize,
) -> Result<Vec<Vec<CompletionCell>>> {
    let expected = n_samples * group_size;
    let mut grid: Vec<Vec<Option<CompletionCell>>> = vec![vec![None; group_size]; n_samples];
    for record in records {
        let (i, j) = (
            record.sample_index as usize,
            record.completion_index as usize,
        );
        if i >= n_samples || j >= group_size {
            return Err(Error::Shape(format!(
                "expected a {n_samples} x {group_size} grid, found cell ({i}, {j})"
            )));
        }
        if grid[i][j].is_some() {
            return Err(Error::Shape(format!(
                "duplicate completion for cell ({i}, {j})"
            )));
        }
        grid[i][j] = Some((record.text.clone(), record.token_count));
    }
    if records.len() != expected {
        return Err(Error::Shape(format!(
            "expected {expected} completion records ({n_samples} samples x {group_size} completions), found {}",
            records.len()
        )));
    }
    Ok(grid
        .into_iter()
        .map(|row| row.into_iter().map(|c| c.expect("counted above")).collect())
        .collect())
}

/// Scores every batch of `sliceSize` samples and returns the flat records.
pub fn score_records(
    samples: &[Sample],
    grid: &[Vec<CompletionCell>],
    stage: Stage,
    config: &CurriculumConfig,
) -> Result<Vec<RewardRecord>> {
    if stage == Stage::Two && samples.len() % config.slice_size == 1 {
        return Err(Error::Shape(format!(
            "{} samples leave a tail batch of 1, which cannot be slice-ranked; \
             adjust sliceSize or the dataset",
            samples.len()
        )));
    }
    let mut records = Vec::with_capacity(samples.len() * config.group_size);
    let mut offset = 0usize;
    for (batch, rows) in samples
        .chunks(config.slice_size)
        .zip(grid.chunks(config.slice_size))
    {
        let parsed = rows
            .iter()
            .map(|row| row.iter().map(|(text, _)| parse_completion(text)).collect())
            .collect();
        let matrix = SliceMatrix::from_samples(batch, parsed)?;
        let rewards = compute_batch_rewards(&matrix, stage, config)?;
        for (i, row) in rewards.into_iter().enumerate() {
            for (j, breakdown) in row.into_iter().enumerate() {
                records.push(RewardRecord {
                    sample_index: (offset + i) as u64,
                    completion_index: j as u64,
                    breakdown,
                    token_count: rows[i][j].1,
                });
            }
        }
        offset += batch.len();
    }
    Ok(records)
}

fn cmd_score(manifest: &RunManifest, config: &CurriculumConfig, step: u64) -> Result<()> {
    manifest.validate_paths()?;
    let samples = read_dataset(&manifest.dataset_path)?;
    if samples.is_empty() {
        return Err(Error::Shape("dataset is empty; nothing to score".into()));
    }
    let completions: Vec<CompletionRecord> = read_jsonl(&manifest.completions_path)?;
    let grid = assemble_grid(&completions, samples.len(), config.group_size)?;
    let stage = manifest
        .stage_override
        .unwrap_or_else(|| stage_at(step, config));
    let records = score_records(&samples, &grid, stage, config)?;
    write_jsonl(&manifest.output_path, &records)?;
    println!(
        "scored {} samples x {} completions (stage {})",
        samples.len(),
        config.group_size,
        u8::from(stage)
    );
    Ok(())
}

/// Groups reward records per sample and normalizes each group. Groups are
/// emitted in ascending (sampleIndex, completionIndex) order regardless of
/// input order. Returns the records plus the zero-variance group count.
pub fn advantage_records(
    rewards: &[RewardRecord],
    config: &CurriculumConfig,
) -> Result<(Vec<AdvantageRecord>, usize)> {
    let mut groups: BTreeMap<u64, Vec<&RewardRecord>> = BTreeMap::new();
    for record in rewards {
        groups.entry(record.sample_index).or_default().push(record);
    }
    let mut out = Vec::with_capacity(rewards.len());
    let mut zero_variance = 0usize;
    for (sample_index, mut group) in groups {
        if group.len() != config.group_size {
            return Err(Error::Shape(format!(
                "sample {sample_index} has {} reward records, expected groupSize {}",
                group.len(),
                config.group_size
            )));
        }
        group.sort_by_key(|r| r.completion_index);
        for (j, record) in group.iter().enumerate() {
            if record.completion_index != j as u64 {
                return Err(Error::Shape(format!(
                    "sample {sample_index} is missing completionIndex {j}"
                )));
            }
        }
        let totals: Vec<f64> = group.iter().map(|r| r.breakdown.total).collect();
        if totals.iter().all(|&t| t == totals[0]) {
            zero_variance += 1;
        }
        let advantages = group_advantages(&totals, config.epsilon);
        for (record, advantage) in group.iter().zip(advantages) {
            out.push(AdvantageRecord {
                sample_index: record.sample_index,
                completion_index: record.completion_index,
                reward: record.breakdown.total,
                advantage,
                token_count: record.token_count,
            });
        }
    }
    Ok((out, zero_variance))
}

fn cmd_advantage(rewards_path: &Path, config: &CurriculumConfig, output: &Path) -> Result<()> {
    let rewards: Vec<RewardRecord> = read_jsonl(rewards_path)?;
    let (records, zero_variance) = advantage_records(&rewards, config)?;
    let groups = records.len() / config.group_size;
    write_jsonl(output, &records)?;
    println!(
        "normalized {} completions in {} groups ({} zero-variance)",
        records.len(),
        groups,
        zero_variance
    );
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
#[serde(untagged)]
enum PredictionLine {
    Completion(CompletionRecord),
    Flat(FlatPredictionRecord),
}

fn cmd_evaluate(predictions_path: &Path, dataset_path: &Path, output: Option<&Path>) -> Result<()> {
    let samples = read_dataset(dataset_path)?;
    let lines: Vec<PredictionLine> = read_jsonl(predictions_path)?;
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    let mut excluded = 0u64;
    for line in &lines {
        let (sample_index, score) = match line {
            PredictionLine::Completion(record) => match parse_completion(&record.text).score {
                Some(score) => (record.sample_index, score),
                None => {
                    excluded += 1;
                    continue;
                }
            },
            PredictionLine::Flat(record) => {
                if !(1..=5).contains(&record.score) {
                    return Err(Error::Range(format!(
                        "flat prediction for sample {} has score {}, expected 1..=5",
                        record.sample_index, record.score
                    )));
                }
                (record.sample_index, record.score)
            }
        };
        let index = sample_index as usize;
        if index >= samples.len() {
            return Err(Error::Shape(format!(
                "prediction references sample {index}, but the dataset has {} samples",
                samples.len()
            )));
        }
        predicted.push(score);
        gold.push(samples[index].label);
    }
    if predicted.is_empty() {
        return Err(Error::Degenerate(format!(
            "no valid predictions to evaluate ({excluded} invalid of {} records)",
            lines.len()
        )));
    }
    let predicted_f: Vec<f64> = predicted.iter().map(|&p| f64::from(p)).collect();
    let gold_f: Vec<f64> = gold.iter().map(|&g| f64::from(g)).collect();
    let report = EvaluationReport {
        spearman_x100: spearman(&predicted_f, &gold_f)? * 100.0,
        pearson_x100: pearson(&predicted_f, &gold_f)? * 100.0,
        histogram: error_histogram(&predicted, &gold),
        evaluated: predicted.len() as u64,
        excluded,
    };
    println!("samples: {}", samples.len());
    println!("evaluated: {}", report.evaluated);
    println!("excluded: {}", report.excluded);
    println!("spearman_x100: {:.2}", report.spearman_x100);
    println!("pearson_x100: {:.2}", report.pearson_x100);
    let counts = report.histogram.counts;
    println!(
        "error_histogram: 0:{} 1:{} 2:{} 3:{} 4:{}",
        counts[0], counts[1], counts[2], counts[3], counts[4]
    );
    if let Some(path) = output {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json)?;
    }
    Ok(())
}

fn cmd_simulate(
    policy: SyntheticPolicy,
    pairs: usize,
    iterations: u64,
    seed: u64,
    config: &CurriculumConfig,
    output: &Path,
) -> Result<()> {
    if pairs == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let dataset = generate_dataset(pairs, seed);
    let trajectory = hill_climb(policy, &dataset, config, iterations, seed)?;
    let records: Vec<TrajectoryRecord> = trajectory
        .points
        .iter()
        .map(TrajectoryRecord::from)
        .collect();
    write_jsonl(output, &records)?;
    let initial = trajectory.initial();
    let last = trajectory.last();
    println!(
        "iterations: {}, heldout spearman: {} -> {}",
        iterations,
        format_option(initial.heldout_spearman),
        format_option(last.heldout_spearman)
    );
    Ok(())
}

fn format_option(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "undefined".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u64, j: u64, text: &str) -> CompletionRecord {
        CompletionRecord {
            sample_index: i,
            completion_index: j,
            text: text.into(),
            token_count: None,
        }
    }

    #[test]
    fn assemble_grid_accepts_any_record_order() {
        let records = vec![
            record(1, 0, "b0"),
            record(0, 1, "a1"),
            record(0, 0, "a0"),
            record(1, 1, "b1"),
        ];
        let grid = assemble_grid(&records, 2, 2).unwrap();
        assert_eq!(grid[0][0].0, "a0");
        assert_eq!(grid[1][1].0, "b1");
    }

    #[test]
    fn assemble_grid_rejects_missing_cells() {
        let records = vec![record(0, 0, "a0"), record(0, 1, "a1"), record(1, 0, "b0")];
        let err = assemble_grid(&records, 2, 2).unwrap_err();
        assert!(err.to_string().contains("expected 4"), "{err}");
    }

    #[test]
    fn assemble_grid_rejects_duplicates_and_out_of_range() {
        let records = vec![record(0, 0, "x"), record(0, 0, "y")];
        assert!(assemble_grid(&records, 1, 2).is_err());
        let records = vec![record(0, 5, "x")];
        assert!(assemble_grid(&records, 1, 2).is_err());
    }

    #[test]
    fn advantage_records_require_full_groups() {
        let config = CurriculumConfig {
            group_size: 2,
            ..CurriculumConfig::default()
        };
        let rewards = vec![RewardRecord {
            sample_index: 7,
            completion_index: 0,
            breakdown: crate::stage1::stage1_reward(
                &crate::domain::ParsedPrediction::invalid(),
                3,
                &config.stage1_weights,
            ),
            token_count: None,
        }];
        let err = advantage_records(&rewards, &config).unwrap_err();
        assert!(err.to_string().contains("sample 7"), "{err}");
    }

    #[test]
    fn advantage_records_count_zero_variance_groups() {
        let config = CurriculumConfig {
            group_size: 2,
            ..CurriculumConfig::default()
        };
        let breakdown = crate::stage1::stage1_reward(
            &crate::domain::ParsedPrediction::invalid(),
            3,
            &config.stage1_weights,
        );
        let rewards: Vec<RewardRecord> = (0..2)
            .map(|j| RewardRecord {
                sample_index: 0,
                completion_index: j,
                breakdown,
                token_count: None,
            })
            .collect();
        let (records, zero_variance) = advantage_records(&rewards, &config).unwrap();
        assert_eq!(zero_variance, 1);
        assert!(records.iter().all(|r| r.advantage == 0.0));
    }

    #[test]
    fn stage2_batches_are_scored_independently() {
        use crate::domain::{Judgment, ParsedPrediction};
        use crate::ranking::{build_slices, listwise_rewards};

        let config = CurriculumConfig {
            slice_size: 2,
            group_size: 2,
            ..CurriculumConfig::default()
        };
        let samples: Vec<Sample> = [3u8, 1, 5, 2]
            .iter()
            .enumerate()
            .map(|(i, &label)| Sample::new(format!("s{i}"), format!("t{i}"), "c", label).unwrap())
            .collect();
        let score_of = |v: u8| {
            let judgment = if v >= 3 { Judgment::Yes } else { Judgment::No };
            ParsedPrediction::valid(judgment, v)
        };
        let grid: Vec<Vec<(String, Option<u64>)>> = [[3u8, 2], [2, 1], [4, 5], [1, 3]]
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        let judgment = if v >= 3 { "yes" } else { "no" };
                        (format!("<answer>{judgment}({v})</answer>"), None)
                    })
                    .collect()
            })
            .collect();
        let records = score_records(&samples, &grid, Stage::Two, &config).unwrap();

        // The second batch (samples 2..4) must match a standalone scoring of
        // just those samples: slices never cross batch boundaries.
        let rows = vec![vec![score_of(4), score_of(5)], vec![score_of(1), score_of(3)]];
        let standalone = SliceMatrix::from_samples(&samples[2..], rows).unwrap();
        let slices = build_slices(&standalone).unwrap();
        let expected_listwise = listwise_rewards(&slices[0]);
        let record = records
            .iter()
            .find(|r| r.sample_index == 2 && r.completion_index == 0)
            .unwrap();
        assert_eq!(record.breakdown.listwise, expected_listwise[0]);
    }

    #[test]
    fn stage2_tail_batch_of_one_is_rejected() {
        let config = CurriculumConfig {
            slice_size: 2,
            group_size: 2,
            ..CurriculumConfig::default()
        };
        let samples: Vec<Sample> = (0..3)
            .map(|i| Sample::new(format!("s{i}"), format!("t{i}"), "c", 3).unwrap())
            .collect();
        let grid: Vec<Vec<(String, Option<u64>)>> =
            vec![vec![("<answer>yes(3)</answer>".to_string(), None); 2]; 3];
        let err = score_records(&samples, &grid, Stage::Two, &config).unwrap_err();
        assert!(err.to_string().contains("tail batch"), "{err}");
        // Stage 1 has no slice geometry and accepts the same shape.
        assert!(score_records(&samples, &grid, Stage::One, &config).is_ok());
    }
}
