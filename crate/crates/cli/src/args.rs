use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use profiling_core::Task;

#[derive(Debug, Parser)]
#[command(
    name = "profile-pipeline",
    version,
    about = "Author profiling from tweets: GRU baseline, aggregation, ensembling and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a corpus into TRAIN and DEV by user.
    Split(SplitArgs),
    /// Merge an extension corpus into a base corpus.
    Merge(MergeArgs),
    /// Build the token vocabulary from a TRAIN corpus.
    BuildVocab(BuildVocabArgs),
    /// Train the GRU tweet classifier for one task.
    TrainGru(TrainArgs),
    /// Write tweet-level predictions from a checkpoint.
    Predict(PredictArgs),
    /// Check a tweet prediction file against a corpus.
    ValidatePreds(ValidateArgs),
    /// Turn tweet predictions into one label per user.
    Aggregate(AggregateArgs),
    /// Pick the aggregation threshold that maximizes DEV user accuracy.
    Calibrate(CalibrateArgs),
    /// Majority vote over user-level prediction files.
    Ensemble(EnsembleArgs),
    /// Per-task and joint user-level accuracy.
    Evaluate(EvaluateArgs),
    /// split, vocabulary, training, prediction, calibration, aggregation and evaluation in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed for every random choice; falls back to PROFILE_PIPELINE_SEED.
    #[arg(long, env = "PROFILE_PIPELINE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Fraction of users assigned to TRAIN.
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// May be repeated; extensions are merged in the order given.
    #[arg(long, required = true)]
    pub extension: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = profiling_core::textprep::DEFAULT_VOCAB_CAP)]
    pub cap: usize,
}

/// GRU settings that may also come from the `gru` object of a config file.
#[derive(Debug, Default, Args)]
pub struct GruOverrides {
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// JSON file with a `gru` object; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write every epoch's checkpoint, not only the best one.
    #[arg(long)]
    pub keep_checkpoints: bool,
    #[command(flatten)]
    pub gru: GruOverrides,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "gru")]
    pub source_tag: String,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "predictions.jsonl")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(
        long,
        conflicts_with = "calibration",
        required_unless_present = "calibration"
    )]
    pub threshold: Option<f64>,
    /// Take the threshold from a `calibrate` output file.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Without an output directory the labels go to standard output.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value = "user_predictions.jsonl")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub preds: PathBuf,
    /// Corpus holding the gold labels.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// User-level prediction files, highest priority first.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value = "ensemble.jsonl")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred_age: Option<PathBuf>,
    #[arg(long)]
    pub pred_dialect: Option<PathBuf>,
    #[arg(long)]
    pub pred_gender: Option<PathBuf>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "system")]
    pub condition: String,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Also write report.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSON file mirroring these flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Extra TRAIN data merged after the split. May be repeated.
    #[arg(long)]
    pub extension: Vec<PathBuf>,
    /// Corpus to label after calibration; defaults to the DEV split.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<Task>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    /// Skip the threshold sweep and aggregate at this threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub gru: GruOverrides,
    #[command(flatten)]
    pub seed: SeedArg,
}
