//! `igcf` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use igcf::ErrorClass;

use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "igcf",
    version,
    about = "Graph-pretrained interactive recommendation pipeline"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "IGCF_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "IGCF_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "IGCF_OUT")]
    out: Option<PathBuf>,
    /// Comma-separated policy tags.
    #[arg(long, global = true, env = "IGCF_POLICIES")]
    policies: Option<String>,
    /// Horizon (rounds per user or per replication).
    #[arg(long = "T", global = true, env = "IGCF_T")]
    horizon: Option<usize>,
    /// Slate size.
    #[arg(long = "k", global = true, env = "IGCF_K")]
    slate_size: Option<usize>,
    /// Fraction of users kept from the dataset.
    #[arg(long, global = true, env = "IGCF_SUBSAMPLE")]
    subsample: Option<f64>,
    /// Raise log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain on the protocol's training split and write a snapshot.
    Pretrain,
    /// Replay the configured policies on the held-out users.
    Evaluate {
        /// Snapshot written by `pretrain` with the same configuration.
        #[arg(long, env = "IGCF_SNAPSHOT", conflicts_with = "pretrain")]
        snapshot: Option<PathBuf>,
        /// Pretrain in-process instead of loading a snapshot.
        #[arg(long)]
        pretrain: bool,
    },
    /// Synthetic regret curves and analytic bounds.
    Regret,
    /// Describe a snapshot file.
    InspectSnapshot {
        path: PathBuf,
        /// Also export the variational parameters as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn run(cli: Cli) -> igcf::Result<()> {
    let g = &cli.global;
    let overrides = Overrides {
        seed: g.seed,
        out: g.out.clone(),
        policies: g.policies.clone(),
        horizon: g.horizon,
        slate_size: g.slate_size,
        subsample: g.subsample,
    };
    let lab = matches!(cli.command, Command::Regret);
    let load = || -> igcf::Result<RunConfig> {
        let mut config = RunConfig::load(g.config.as_deref())?;
        config.apply(&overrides, lab)?;
        Ok(config)
    };
    match &cli.command {
        Command::Pretrain => commands::pretrain_cmd(&load()?),
        Command::Evaluate { snapshot, pretrain } => commands::evaluate_cmd(&load()?, snapshot.as_deref(), *pretrain),
        Command::Regret => commands::regret_cmd(&load()?),
        Command::InspectSnapshot { path, csv } => commands::inspect_cmd(path, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
