use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svdiff::cli::{build_config, run, Command, Overrides};

/// Simulation, estimation and goodness-of-fit testing for stochastic volatility diffusions.
#[derive(Parser)]
#[command(name = "svdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate a path and write it as `t,r,sigma2`.
    Simulate(Flags),
    /// Fit the model with the configured estimator.
    Estimate(Flags),
    /// Bootstrap goodness-of-fit test of the drift or volatility.
    Gof(Flags),
    /// Monte Carlo size and power study.
    McStudy(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration; a previous run's manifest.txt also works.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Estimate(f) => (Command::Estimate, f),
        Sub::Gof(f) => (Command::Gof, f),
        Sub::McStudy(f) => (Command::McStudy, f),
    };
    let overrides = Overrides {
        config: flags.config,
        seed: flags.seed,
        workers: flags.workers,
        out: flags.out,
    };
    match build_config(command, &overrides).and_then(run) {
        Ok(artifacts) => {
            for w in &artifacts.warnings {
                eprintln!("warning: {w}");
            }
            for f in &artifacts.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("svdiff: {e}");
            ExitCode::FAILURE
        }
    }
}
