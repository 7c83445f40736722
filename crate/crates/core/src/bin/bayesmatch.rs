use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bayesmatch::error::Result;
use bayesmatch::harness::{self, ExperimentConfig, Overrides};

/// Bayesian matching of noisy one-dimensional point sets.
///
/// Flags override keys of the --config document, which override defaults.
/// Exit status: 0 success, 2 configuration error, 3 engine size cap,
/// 4 numerical failure.
#[derive(Parser)]
#[command(name = "bayesmatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Marginal engine name (auto, bruteforce, permanent, banded, subset_dp, sweep).
    #[arg(long, value_name = "NAME")]
    engine: Option<String>,
    #[arg(long, value_name = "INT")]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample instances and write them with a manifest.
    Generate(Common),
    /// Full posterior marginals.
    Marginals {
        #[command(flatten)]
        common: Common,
        /// Instance file; defaults to sampling from the configuration.
        instance: Option<PathBuf>,
    },
    /// Local-algorithm marginals for each configured M.
    Local {
        #[command(flatten)]
        common: Common,
        instance: Option<PathBuf>,
    },
    /// Mean TV between local and full marginals.
    TvExperiment(Common),
    /// Convergence of the point-process limit and finite-n cost comparison.
    LimitExperiment(Common),
    /// Regularity-event rates.
    Diagnostics(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: c.seed,
        out: c.out.clone(),
        engine: c.engine.clone(),
        reps: c.reps,
    });
    Ok(cfg)
}

fn run(cmd: Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Generate(c) => harness::cmd_generate(load(&c)?),
        Command::Marginals { common, instance } => harness::cmd_marginals(load(&common)?, instance.as_deref()),
        Command::Local { common, instance } => harness::cmd_local(load(&common)?, instance.as_deref()),
        Command::TvExperiment(c) => harness::cmd_tv_experiment(load(&c)?),
        Command::LimitExperiment(c) => harness::cmd_limit_experiment(load(&c)?),
        Command::Diagnostics(c) => harness::cmd_diagnostics(load(&c)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bayesmatch: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
