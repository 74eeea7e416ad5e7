//! Command-line front end: train, predict, pipeline, evaluate, gradcheck,
//! inspect.
//!
//! Exit codes: 0 success, 1 usage error, 2 data fault, 3 numeric fault.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "relsa",
    version,
    about = "Relational sentiment analysis: term extraction, opinion sentiment, aspect-opinion relations"
)]
pub struct Cli {
    /// Emit JSON reports on stdout instead of aligned text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Terms,
    Sentiment,
    Relations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Terms,
    Sentiment,
    Relations,
    Cv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one pipeline stage and write a model bundle.
    Train(TrainArgs),
    /// Run one trained model over a corpus and write its predictions.
    Predict(PredictArgs),
    /// Run all three stages over a corpus.
    Pipeline(PipelineArgs),
    /// Score predictions against gold annotations, or run cross-validation.
    Evaluate(EvaluateArgs),
    /// Verify model gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Show the metadata and parameter table of a model bundle.
    Inspect(InspectArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub stage: Stage,
    /// Training corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output model bundle path.
    #[arg(long)]
    pub out: PathBuf,
    /// Pretrained word embeddings in word2vec text format; random
    /// initialization when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stage defaults when omitted: terms 15, sentiment 14, relations 28.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Tagger architecture (terms stage only).
    #[arg(long, default_value = "stacked")]
    pub kind: String,
    /// POS one-hot features for the tagger; defaults to the architecture's
    /// own setting.
    #[arg(long)]
    pub use_pos: Option<bool>,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub decay_rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub rms_epsilon: f64,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    /// Model bundle; the stage is inferred from its kind.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relation decision threshold.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, clap::Args)]
pub struct PipelineArgs {
    /// The three stage bundles (terms, sentiment, relations), any order;
    /// dispatched by bundle kind.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    /// Gold corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Predictions corpus (JSONL) to score.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Model bundle to predict with instead of --pred.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Folds for cv mode.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Tagger architecture for cv retraining.
    #[arg(long, default_value = "stacked")]
    pub kind: String,
    #[arg(long)]
    pub use_pos: Option<bool>,
    /// Overrides every stage's epoch count in cv mode.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    /// Model kind, or "all".
    #[arg(long, default_value = "all")]
    pub kind: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let json = cli.json;
    let result = match cli.command {
        Command::Train(args) => commands::train(&args, json),
        Command::Predict(args) => commands::predict(&args, json),
        Command::Pipeline(args) => commands::pipeline(&args, json),
        Command::Evaluate(args) => commands::evaluate(&args, json),
        Command::Gradcheck(args) => commands::gradcheck(&args, json),
        Command::Inspect(args) => commands::inspect(&args, json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                ExitCode::from(EXIT_NUMERIC)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
