//! `idrr`: prepare data, train, evaluate, analyze and run baselines from a
//! TOML experiment config.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.

mod commands;
mod data;
mod exit;
mod report;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idrr_core::analysis::DEFAULT_DRAWS;

use crate::commands::Common;
use crate::exit::{classify, Failure};

#[derive(Parser)]
#[command(name = "idrr", version, about = "Multi-task implicit discourse relation recognition")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; for `evaluate`, the training run to evaluate.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Split seed for `prepare`; single training seed for `train` and `baseline`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Replace outputs left by an earlier run.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Adapt the corpus, split it and write summary statistics.
    Prepare,
    /// Train one model per seed and evaluate it on the test split.
    Train {
        /// Use this prepared-data directory instead of preparing from the config.
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Evaluate a training run on a test set.
    Evaluate {
        /// discogem, pdtb-lin, pdtb-ji, pdtb-cross or an instances .jsonl file.
        #[arg(long, default_value = "discogem")]
        test: String,
    },
    /// Top-k agreement with reference labels and cross-level coherence.
    Analyze {
        /// Tab-separated `id<TAB>sense` reference labels.
        #[arg(long, value_name = "TSV")]
        refs: Option<PathBuf>,
        /// Evaluated training run; repeat for several.
        #[arg(long = "run", value_name = "DIR")]
        runs: Vec<PathBuf>,
        /// Sense level of the reference labels.
        #[arg(long, default_value_t = 2)]
        level: u8,
    },
    /// Random baseline sampled from the training split's sense marginals.
    Baseline {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Labels drawn per instance and level.
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out = cli
        .global
        .out
        .clone()
        .ok_or_else(|| Failure::config("--out DIR is required"))?;
    let common = Common {
        config: cli.global.config,
        out,
        seed: cli.global.seed,
        force: cli.global.force,
    };
    match cli.command {
        Command::Prepare => commands::prepare(&common),
        Command::Train { data } => commands::train(&common, data.as_deref()),
        Command::Evaluate { test } => commands::evaluate(&common, &test),
        Command::Analyze { refs, runs, level } => commands::analyze(&common, refs.as_deref(), &runs, level),
        Command::Baseline { data, draws } => commands::baseline(&common, data.as_deref(), draws),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = classify(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(kind.code() as u8)
        }
    }
}
