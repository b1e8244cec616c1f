//! Command-line front end: synthetic data, fitting, prediction, grid search
//! and the benchmark experiments.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "cdf-svm", version, about = "Distribution-weighted kernel classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunConfig,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Writes a generated dataset and prints its Bayes-optimal rule.
    Synth,
    /// Fits one configuration on a train split and evaluates the test split.
    Fit,
    /// Scores a CSV file with a saved model.
    Predict,
    /// Cross-validated grid search.
    Cv,
    /// Repeated boundary recovery on the bivariate Gaussian problem.
    BenchBayes,
    /// Selected-cell G-mean table over datasets and methods.
    BenchUci,
    /// Score curves on the one-dimensional problem.
    Robustness,
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let cfg = cli.run.resolve()?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Predict => commands::predict(&cfg),
        Command::Cv => commands::cv(&cfg),
        Command::BenchBayes => commands::bench_bayes_cmd(&cfg),
        Command::BenchUci => commands::bench_uci_cmd(&cfg),
        Command::Robustness => commands::robustness(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
