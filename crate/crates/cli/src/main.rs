//! `mujica`: run the QA agent, sample training data and check the
//! truncation bounds.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mujica_core::env::EnvError;
use mujica_core::gateway::GatewayError;
use mujica_core::metrics::MetricsError;
use mujica_core::mygo::{MygoError, WARMUP_PRESETS};
use mujica_core::protocol::AgentError;
use mujica_core::theory::TheoryError;

use commands::{Ctx, SampleArgs};
use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "mujica", version, about)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the retrieval index (text) or load the graph (kg).
    Index,
    /// Answer every dataset question at temperature 0 and score it.
    Qa,
    /// Rejection-sample trajectories with the progressive threshold.
    Sample {
        /// One pass with a fixed threshold.
        #[arg(long)]
        offline: bool,
        #[arg(long)]
        k_init: Option<f64>,
        /// Online iterations; defaults to one per batch.
        #[arg(long)]
        iterations: Option<usize>,
        /// Command run after each online batch with the dataset path and
        /// iteration appended.
        #[arg(long)]
        hook: Option<String>,
    },
    /// Random warm-up subset of a trajectory file.
    Warmup {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long, default_value_t = WARMUP_PRESETS[0])]
        limit: usize,
    },
    /// Training records from trajectories whose reward exceeds `k`.
    EmitSft {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        k: f64,
    },
    /// Score a predictions file against gold answers.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Partition functions and KL bounds for a reward landscape.
    Verify {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,1,0.5,0.25")]
        alpha_grid: Vec<f64>,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        delta: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    if let (Some(cfg), Some(seed)) = (config.as_mut(), cli.seed) {
        cfg.seed = seed;
    }
    let seed = config.as_ref().map_or(cli.seed.unwrap_or(0), |c| c.seed);
    if let Some(cfg) = &config {
        mujica_core::par::init_pool(cfg.threads());
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let ctx = Ctx {
        config,
        seed,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Index => commands::index(&ctx),
        Command::Qa => commands::qa(&ctx),
        Command::Sample {
            offline,
            k_init,
            iterations,
            hook,
        } => commands::sample(
            &ctx,
            &SampleArgs {
                offline,
                k_init,
                iterations,
                hook,
            },
        ),
        Command::Warmup { trajectories, limit } => commands::warmup(&ctx, &trajectories, limit),
        Command::EmitSft { trajectories, k } => commands::emit(&ctx, &trajectories, k),
        Command::Eval { pred, gold } => commands::eval(&ctx, &pred, &gold),
        Command::Verify {
            landscape,
            alpha_grid,
            k,
            delta,
        } => commands::verify(&ctx, &landscape, &alpha_grid, k, delta),
    }
}

/// Short machine-readable name for the first recognised error in the chain.
fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return "config";
        }
        if let Some(m) = cause.downcast_ref::<MygoError>() {
            match m {
                MygoError::HookFailed { .. } => return "hook_failed",
                MygoError::InvalidConfig(_) => return "config",
                MygoError::EmptyBatch => return "empty_set",
                _ => continue,
            }
        }
        if cause.is::<MetricsError>() {
            return "empty_set";
        }
        if cause.is::<AgentError>() || cause.is::<GatewayError>() {
            return "backend";
        }
        if cause.is::<EnvError>() {
            return "environment";
        }
        if cause.is::<TheoryError>() {
            return "theory";
        }
        if cause.is::<serde_json::Error>() {
            return "parse";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({"error": error_kind(&e), "message": format!("{e:#}")});
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
