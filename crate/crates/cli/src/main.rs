//! Command-line entry point wiring the config file to the pipeline,
//! simulator, evaluation and oracle stages.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skywatch_core::config::PipelineConfig;
use skywatch_core::detection::Rule;
use skywatch_core::CoreError;

/// Exit codes: every failure class gets its own status.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const IO: u8 = 3;
    pub const NO_DETECTION: u8 = 4;
    pub const CHECK_VIOLATION: u8 = 5;
    pub const NO_CONVERGENCE: u8 = 6;
}

#[derive(Debug, Parser)]
#[command(
    name = "skywatch",
    about = "Dim-target detection pipeline: synthetic encounters, HMM filtering, greedy stopping rules, and a desk-scale stopping oracle"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON pipeline configuration; defaults are used when absent.
    #[arg(long, global = true, env = "SKYWATCH_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "SKYWATCH_OUT", default_value = "out")]
    out: PathBuf,

    /// Master seed override.
    #[arg(long, global = true, env = "SKYWATCH_SEED")]
    seed: Option<u64>,

    /// Worker thread count (0 = all cores).
    #[arg(long, global = true, env = "SKYWATCH_WORKERS")]
    workers: Option<usize>,

    /// Comma-separated rules to run (isd,g1,g2).
    #[arg(long, global = true, env = "SKYWATCH_RULES", value_delimiter = ',')]
    rules: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the standard synthetic encounter suite.
    Simulate,
    /// Run the detection pipeline over a directory of PGM frames.
    Detect {
        /// Directory holding the ordered frames.
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Evaluate rules over a suite written by `simulate`.
    Evaluate {
        /// Suite directory.
        #[arg(long)]
        suite: PathBuf,
    },
    /// Solve the stopping problem on the configured small instance and
    /// run the structural checks.
    Oracle,
}

fn load_config(common: &Common) -> Result<PipelineConfig, CoreError> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.suite.master_seed = seed;
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    if let Some(rules) = &common.rules {
        let parsed: Result<Vec<Rule>, CoreError> = rules.iter().map(|r| r.parse()).collect();
        config.rules = Some(parsed?);
    }
    Ok(config)
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::Io { .. } | CoreError::Format { .. } => exit::IO,
        _ => exit::VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli.common) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit::VALIDATION);
        }
    };

    if config.workers > 0 {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
        {
            eprintln!("error: failed to size the worker pool: {err}");
            return ExitCode::from(exit::VALIDATION);
        }
    }

    let result = match &cli.command {
        Command::Simulate => commands::simulate(&config, &cli.common.out),
        Command::Detect { sequence } => commands::detect(&config, sequence, &cli.common.out),
        Command::Evaluate { suite } => commands::evaluate(&config, suite, &cli.common.out),
        Command::Oracle => commands::oracle(&config, &cli.common.out),
    };

    match result {
        Ok(status) => ExitCode::from(status),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
