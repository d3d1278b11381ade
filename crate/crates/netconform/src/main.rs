//! Thin command-line entry point; all behavior lives in [`netconform::cli`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netconform::cli::{run_command, CommandKind, RunSpec};

/// Split conformal prediction for network-linked data, driven by config
/// files: simulate datasets, extract network covariates, calibrate
/// prediction intervals or label sets, and run coverage experiments.
#[derive(Debug, Parser)]
#[command(name = "netconform", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one dataset from a scenario config and save it.
    Simulate(CommonArgs),
    /// Append network covariates to a dataset and save the result.
    Extract(CommonArgs),
    /// Conformal prediction intervals for a real-valued response.
    Conform(CommonArgs),
    /// Monte Carlo coverage study: report.csv and curves.csv.
    Experiment(CommonArgs),
    /// Conformal label sets for a categorical response.
    Classify(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's replicate count (experiment only).
    #[arg(long)]
    replicates: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Extract(a) => (CommandKind::Extract, a),
        Command::Conform(a) => (CommandKind::Conform, a),
        Command::Experiment(a) => (CommandKind::Experiment, a),
        Command::Classify(a) => (CommandKind::Classify, a),
    };
    let spec = RunSpec {
        command,
        config: args.config,
        out: args.out,
        seed: args.seed,
        replicates: args.replicates,
    };
    match run_command(&spec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netconform error [{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
