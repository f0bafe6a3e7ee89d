//! Command-line driver: ingest, cluster, sample, diagnose, train, eval,
//! sweep, leave-one-dataset-out and synthetic corpus generation.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Bad flags, bad config or an invalid parameter combination.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "topicwise",
    version,
    about = "Topic-guided subset curation and stance head training"
)]
struct Cli {
    /// TOML or JSON file with `run`, `ingest` and `synthetic` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read labeled datasets into one corpus with standardized labels.
    Ingest(commands::IngestArgs),
    /// Partition the corpus into topic clusters.
    Cluster(commands::ClusterArgs),
    /// Draw a training subset.
    Sample(commands::SampleArgs),
    /// Compare topic and label balance of a subset against the corpus.
    Diagnose(commands::DiagnoseArgs),
    /// Fit the encoder head on a subset.
    Train(commands::TrainArgs),
    /// Score a model or a predictions file on a labeled corpus.
    Eval(commands::EvalArgs),
    /// Sample, train and evaluate at several budgets.
    Sweep(commands::SweepArgs),
    /// Train without one dataset and evaluate on it.
    Loo(commands::LooArgs),
    /// Write the seeded synthetic benchmark corpus.
    Synth(commands::SynthArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<topicwise::Error>() {
            return if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            };
        }
    }
    EXIT_DATA
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = config::load(cli.config.as_deref())?.resolve(&cli.overrides)?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a, &cfg),
        Command::Cluster(a) => commands::cluster(&a, &cfg),
        Command::Sample(a) => commands::sample(&a, &cfg),
        Command::Diagnose(a) => commands::diagnose(&a, &cfg),
        Command::Train(a) => commands::train(&a, &cfg),
        Command::Eval(a) => commands::eval(&a, &cfg),
        Command::Sweep(a) => commands::sweep(&a, &cfg),
        Command::Loo(a) => commands::loo(&a, &cfg),
        Command::Synth(a) => commands::synth(&a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
