//! `triagebench`: run the vignette-based triage evaluation pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "triagebench",
    version,
    about = "Vignette-based triage accuracy evaluation for symptom checkers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration document (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = "TRIAGEBENCH_OUT")]
    pub out: Option<PathBuf>,

    /// Sensitivity mapping variant (repeatable); replaces the config list.
    #[arg(long = "variant", global = true, value_name = "NAME")]
    pub variants: Vec<String>,

    /// Seed for `simulate`; overrides the spec and config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Skip pilot refinement in `all` even if the config enables it.
    #[arg(long, global = true)]
    pub no_refine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check a study's files and structure.
    Validate,
    /// Refine a pilot vignette set by item difficulty and item-total correlation.
    Refine,
    /// Pool multi-inputter advice by majority vote; report agreement.
    Pool,
    /// Compute the metric suite, CCS and sensitivity deltas.
    Evaluate,
    /// Re-run metrics under alternative mapping variants.
    Sensitivity,
    /// Generate a synthetic study from a simulation spec.
    Simulate,
    /// Render report.md, CSV tables and charts from an evaluation.
    Report,
    /// validate -> refine (optional) -> pool -> evaluate -> report.
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
