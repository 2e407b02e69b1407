//! `opident`: generate synthetic identification corpora, train
//! networks, sweep architectures, and evaluate saved models.

mod commands;
mod config;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use opident_core::{Error, ReportFormat};

use commands::System;
use config::{resolve_seed, FileConfig, TrainerKind};

#[derive(Parser)]
#[command(
    name = "opident",
    version,
    about = "Nonlinear system identification with multilayer perceptrons"
)]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed. Overrides the config file and the OPIDENT_SEED
    /// environment variable.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic corpus and write it as CSV.
    GenData {
        /// Which system to simulate.
        #[arg(value_enum)]
        system: System,
        /// Output directory.
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Train one network on a CSV corpus.
    Train {
        /// Training corpus (CSV, last column is the target).
        dataset: PathBuf,
        /// Trainer to use, overriding the config file.
        #[arg(long, value_enum)]
        trainer: Option<TrainerKind>,
        /// Output directory.
        #[arg(long, default_value = "train-out")]
        out: PathBuf,
    },
    /// Train every architecture in the grid with repeated restarts and
    /// rank them.
    Sweep(SweepArgs),
    /// Evaluate a saved model on new inputs.
    Predict {
        /// Model file produced by train or sweep.
        model: PathBuf,
        /// One comma-separated input row.
        #[arg(long, conflicts_with = "data")]
        input: Option<String>,
        /// CSV with the training corpus layout; the target column is
        /// ignored.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write predictions as CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a persisted sweep report.
    Report {
        /// A report.json written by sweep.
        report: PathBuf,
        /// Output rendering.
        #[arg(long, default_value = "table")]
        format: FormatArg,
    },
}

/// Arguments to the sweep subcommand.
#[derive(clap::Args)]
struct SweepArgs {
    /// Training corpus (CSV, last column is the target).
    dataset: PathBuf,
    /// Trainer to use, overriding the config file.
    #[arg(long, value_enum)]
    trainer: Option<TrainerKind>,
    /// Runs per configuration, overriding the config file.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Stdout rendering of the ranking.
    #[arg(long, default_value = "table")]
    format: FormatArg,
    /// Output directory.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
}

/// Clap-parseable mirror of [`ReportFormat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Table,
}

impl From<FormatArg> for ReportFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Table => ReportFormat::Table,
        }
    }
}

/// Maps error categories to stable process exit codes: 2 for rejected
/// input, 3 for file-system problems, 4 for malformed data, 5 for
/// numerical failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidInput(_)
        | Error::ShapeMismatch(_)
        | Error::UnsupportedRange(_)
        | Error::DegenerateColumn(_)
        | Error::InvalidProfile(_)
        | Error::NoValidConfig(_) => 2,
        Error::Io(_) => 3,
        Error::Parse { .. } | Error::Serde(_) => 4,
        Error::NumericalFailure(_) | Error::IntegrationFailure(_) => 5,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenData { system, out } => commands::cmd_gen_data(system, &config, &out),
        Command::Train {
            dataset,
            trainer,
            out,
        } => {
            let seed = resolve_seed(cli.seed, &config)?;
            commands::cmd_train(&dataset, &config, seed, trainer, &out)
        }
        Command::Sweep(args) => {
            let seed = resolve_seed(cli.seed, &config)?;
            commands::cmd_sweep(&config, seed, &args)
        }
        Command::Predict {
            model,
            input,
            data,
            out,
        } => commands::cmd_predict(&model, input.as_deref(), data.as_deref(), out.as_deref()),
        Command::Report { report, format } => commands::cmd_report(&report, format.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
