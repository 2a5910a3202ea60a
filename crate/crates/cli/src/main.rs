//! `gcllab`: datasets, training sweeps, verifiers, diagnostics and ablation
//! tables from the command line.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 usage or
//! configuration error.

mod config;
mod diagnose;
mod error;
mod gen_data;
mod output;
mod table;
mod train;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "gcllab",
    version,
    about = "Graph contrastive learning laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DataKind {
    /// Stochastic block model for node classification.
    Sbm,
    /// Binary graph-classification collection.
    Graphs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset in the native JSON format.
    GenData(gen_data::GenDataArgs),
    /// Run an experiment config; writes a fresh run directory.
    Train {
        config: PathBuf,
        /// Seed-parallel workers; defaults to GCLLAB_WORKERS or 1.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check the gradient-step equivalences on random instances.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        theorem: TheoremArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the JSON report (stdout summary only when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity, spectra, ranks and weight norms of a checkpoint on a dataset.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pooling used for graph collections.
        #[arg(long, value_enum, default_value = "sum")]
        readout: table::ReadoutArg,
    },
    /// Assemble an ablation table from run directories.
    Table {
        /// Run directories or glob patterns.
        #[arg(required = true)]
        runs: Vec<String>,
        #[arg(long, default_value = "Contrast")]
        reference: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(args) => gen_data::run(&args),
        Command::Train { config, workers } => train::run(&config, workers),
        Command::Verify {
            theorem,
            trials,
            n_max,
            seed,
            out,
        } => verify::run(theorem, trials, n_max, seed, out.as_deref()),
        Command::Diagnose {
            checkpoint,
            dataset,
            out,
            readout,
        } => diagnose::run(&checkpoint, &dataset, &out, readout.into()),
        Command::Table {
            runs,
            reference,
            out,
        } => table::run(&runs, &reference, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
