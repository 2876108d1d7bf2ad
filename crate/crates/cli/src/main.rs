//! Command-line front end for lyapctl: train stabilizing controllers
//! for black-box plants and evaluate them, one artifact directory per
//! experiment.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Baseline, PortraitSource};
use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "lyapctl",
    version,
    about = "Learn and evaluate stabilizing controllers for black-box plants",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration, TOML.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory the command reads and writes artifacts in.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides the seed the config sets for this command.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample plant responses and write train/val datasets.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit the control-effect model, then the controller.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Roll out the closed loop from configured starts.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluate a baseline policy instead of the trained controller.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
    /// Estimate the region of attraction from random starts.
    Roa {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluate a baseline policy instead of the trained controller.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
    /// Alternate data collection, training, and evaluation over a
    /// shrinking sampling domain.
    Iterate {
        #[command(flatten)]
        common: CommonArgs,
        /// Overrides the number of rounds the config sets.
        #[arg(long, value_name = "K")]
        rounds: Option<usize>,
    },
    /// Map failure probability under Monte Carlo dropout.
    McDropout {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render plane trajectories to an SVG portrait.
    PhasePortrait {
        #[command(flatten)]
        common: CommonArgs,
        /// What to integrate: the plant in closed loop, or the stable
        /// hypothesis flow on its own.
        #[arg(long, value_enum, default_value = "closed-loop")]
        source: PortraitSource,
        /// Evaluate a baseline policy instead of the trained controller.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
}

/// Honors LYAPCTL_THREADS for the rayon worker count. Results do not
/// depend on it; it only bounds parallelism.
fn init_threads() -> Result<()> {
    let raw = match std::env::var("LYAPCTL_THREADS") {
        Ok(raw) => raw,
        Err(_) => return Ok(()),
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::Config(format!(
                "LYAPCTL_THREADS: expected a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("LYAPCTL_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Generate { common } => {
            commands::generate::run(&common.config, &common.out, common.seed)
        }
        Command::Train { common } => commands::train::run(&common.config, &common.out, common.seed),
        Command::Simulate { common, baseline } => {
            commands::simulate::run(&common.config, &common.out, baseline)
        }
        Command::Roa { common, baseline } => {
            commands::roa::run(&common.config, &common.out, common.seed, baseline)
        }
        Command::Iterate { common, rounds } => {
            commands::iterate::run(&common.config, &common.out, common.seed, rounds)
        }
        Command::McDropout { common } => commands::mc::run(&common.config, &common.out, common.seed),
        Command::PhasePortrait {
            common,
            source,
            baseline,
        } => commands::portrait::run(&common.config, &common.out, common.seed, source, baseline),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
