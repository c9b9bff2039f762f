mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "eeg-lstm", version, about = "EEG trial classification with band-filtered pretraining")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for data loading and filtering.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic three-class dataset.
    Synth(SynthArgs),
    /// Build theta/alpha/beta filtered copies of a dataset.
    Augment(DataArgs),
    /// Train from scratch on the raw training split.
    Train(TrainArgs),
    /// Chain pretraining stages over band subsets.
    Pretrain(PretrainArgs),
    /// Continue from a checkpoint on the raw training split.
    Finetune(FinetuneArgs),
    /// Score a checkpoint on the held-out split.
    Eval(EvalArgs),
    /// Run the five-row comparison (baseline plus four pretrained variants).
    Table2(Table2Args),
    /// Print per-layer parameter counts.
    Params,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Trials per class as `left,high,right`.
    #[arg(long, value_delimiter = ',')]
    pub per_class: Option<Vec<usize>>,
    #[arg(long)]
    pub participants: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory containing `manifest.csv`.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Corpus directory written by `augment`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Band order, e.g. `theta,alpha,beta`.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    /// Epochs per stage.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Start from these weights instead of a fresh initialization.
    #[arg(long)]
    pub from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Split plan JSON; recomputed from the seed when omitted.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    #[arg(long)]
    pub data: PathBuf,
    /// Prebuilt corpus; filtered on the fly when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Pool the band subsets for the last row instead of chaining them.
    #[arg(long)]
    pub mixed_pool: bool,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit code 2.
    Usage(String),
    /// Failure while running: exit code 1.
    Runtime(eeg_lstm::Error),
}

impl From<eeg_lstm::Error> for CliError {
    fn from(e: eeg_lstm::Error) -> Self {
        match e {
            eeg_lstm::Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
