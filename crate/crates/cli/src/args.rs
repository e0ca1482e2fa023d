//! Argument definitions and dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use persuasion_core::model::{DEFAULT_CHECKPOINT, TINY_RANDOM};

use crate::commands::{cmd_baseline, cmd_inspect, cmd_predict, cmd_score, cmd_train, TrainArgs};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "persuasion",
    version,
    about = "Binary persuasion-technique detection"
)]
pub struct Cli {
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` training config.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a labeled corpus, fine-tune, and keep the best checkpoint.
    Train {
        train: PathBuf,
        out_dir: PathBuf,
        /// Checkpoint id: `tiny-random` or a name under the checkpoint cache.
        #[arg(long, default_value = DEFAULT_CHECKPOINT)]
        checkpoint: String,
        #[command(flatten)]
        overrides: Box<TrainFlags>,
    },
    /// Label every snippet of a corpus with a trained checkpoint.
    Predict {
        checkpoint_dir: PathBuf,
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
    },
    /// Score a prediction file against gold labels.
    Score { predictions: PathBuf, gold: PathBuf },
    /// Print size, label distribution, class weights and token lengths.
    Inspect {
        corpus: PathBuf,
        #[arg(long, default_value = TINY_RANDOM)]
        checkpoint: String,
        #[arg(long, default_value_t = 128)]
        max_length: usize,
    },
    /// Predict the training-majority label for every snippet.
    Baseline {
        train: PathBuf,
        input: PathBuf,
        output: PathBuf,
    },
}

/// Per-key overrides of the training config. Values are parsed by the
/// config itself so flag and file errors read the same.
#[derive(Debug, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub max_epochs: Option<String>,
    #[arg(long)]
    pub scheduler_factor: Option<String>,
    #[arg(long)]
    pub scheduler_step: Option<String>,
    #[arg(long)]
    pub patience: Option<String>,
    #[arg(long)]
    pub dropout_rate: Option<String>,
    #[arg(long)]
    pub max_length: Option<String>,
    #[arg(long)]
    pub dev_fraction: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pub use_class_weights: Option<String>,
}

impl TrainFlags {
    fn pairs(&self, seed: Option<u64>) -> Vec<(&'static str, String)> {
        let fields = [
            ("learning_rate", &self.learning_rate),
            ("batch_size", &self.batch_size),
            ("max_epochs", &self.max_epochs),
            ("scheduler_factor", &self.scheduler_factor),
            ("scheduler_step", &self.scheduler_step),
            ("patience", &self.patience),
            ("dropout_rate", &self.dropout_rate),
            ("max_length", &self.max_length),
            ("dev_fraction", &self.dev_fraction),
            ("use_class_weights", &self.use_class_weights),
        ];
        let mut out: Vec<(&'static str, String)> = fields
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        if let Some(seed) = seed {
            out.push(("seed", seed.to_string()));
        }
        out
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::runtime(format!("writing output: {e}")))
}

/// Runs one parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Train {
            train,
            out_dir,
            checkpoint,
            overrides,
        } => {
            let outcome = cmd_train(&TrainArgs {
                train_path: train.clone(),
                out_dir: out_dir.clone(),
                checkpoint: checkpoint.clone(),
                config_file: cli.config.clone(),
                overrides: overrides.pairs(cli.seed),
            })?;
            emit(out, &outcome.summary)
        }
        Command::Predict {
            checkpoint_dir,
            input,
            output,
            batch_size,
        } => {
            let rows = cmd_predict(checkpoint_dir, input, output, *batch_size)?;
            emit(
                out,
                &format!("wrote {rows} predictions to {}\n", output.display()),
            )
        }
        Command::Score { predictions, gold } => {
            let report = cmd_score(predictions, gold)?;
            emit(out, &report.render())
        }
        Command::Inspect {
            corpus,
            checkpoint,
            max_length,
        } => emit(out, &cmd_inspect(corpus, checkpoint, *max_length)?),
        Command::Baseline {
            train,
            input,
            output,
        } => {
            let (label, rows) = cmd_baseline(train, input, output)?;
            emit(
                out,
                &format!(
                    "wrote {rows} predictions of {label} to {}\n",
                    output.display()
                ),
            )
        }
    }
}
