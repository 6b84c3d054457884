//! Command-line surface over `ehdwaves-core`: configuration parsing, subcommands and dataset files.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Outcome, RunContext};
pub use config::{validate_config, ConfigIssue, ConfigReport, RunConfig};
pub use dataset::{BranchDataset, DatasetMeta};
pub use error::{exit, CliError};

/// Environment variable that sets the sweep worker count when `--jobs` is absent.
pub const JOBS_ENV: &str = "EHDWAVES_JOBS";

#[derive(Debug, Parser)]
#[command(name = "ehdwaves", version, about = "Traveling EHD capillary-gravity waves with constant vorticity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file (`key = value` under `[section]` headers); defaults apply without one.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Root for dataset directories; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Extend existing datasets instead of recomputing them.
    #[arg(long, global = true)]
    pub resume: bool,

    /// Worker threads for sweeps.
    #[arg(long, global = true, env = JOBS_ENV)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tabulate D_k(λ) and list the bifurcation speeds.
    Dispersion,
    /// Bifurcation points up to numerics.kmax with kernel dimensions.
    Points,
    /// Continue the primary branch selected in [branch].
    Branch,
    /// Classify the flat state near λ* and the branch leaving it.
    Stability,
    /// Resonance fields and nondegeneracy determinants over a gamma grid.
    ResonanceAtlas,
    /// Find the secondary bifurcation near the (k, l) resonance and switch onto it.
    Secondary,
    /// Independent branch jobs over the [sweep] grid, run in parallel.
    Sweep,
}

/// Reads and validates the configuration named on the command line.
pub fn load_config(cli: &Cli) -> Result<ConfigReport, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(CliError::io(path))?,
        None => String::new(),
    };
    validate_config(&text).map_err(CliError::Config)
}

pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cli.jobs == Some(0) {
        return Err(CliError::Config(vec![ConfigIssue { line: None, key: "--jobs".into(), message: "must be >= 1".into() }]));
    }
    let ctx = RunContext {
        out: cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from(".")),
        resume: cli.resume,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::Dispersion => commands::cmd_dispersion(cfg, &ctx),
        Command::Points => commands::cmd_points(cfg, &ctx),
        Command::Branch => commands::cmd_branch(cfg, &ctx),
        Command::Stability => commands::cmd_stability(cfg, &ctx),
        Command::ResonanceAtlas => commands::cmd_resonance_atlas(cfg, &ctx),
        Command::Secondary => commands::cmd_secondary(cfg, &ctx),
        Command::Sweep => commands::cmd_sweep(cfg, &ctx),
    }
}
