//! Reproduction driver wiring sampling, training, baselines, and evaluation
//! into complete experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wosnn::Error;

use config::{CliOverrides, RunConfig};

const LONG_ABOUT: &str = "\
Grid-free stochastic solver for Laplace/Poisson Dirichlet problems: \
Walk-on-Spheres path sampling plus a shared solution/gradient network, \
with classic WoS, a WoS-driven regression network, and finite differences \
as baselines.

Presets (select with --preset, override any key via --config):
  laplace2d   u = xy on [-1,1]^2, eps 1e-3, 20 steps, 40k starts, net 32/64/128
  poisson2d   du = 2x, u = xy^2 on [-1,1]^2, same sampling budget
  lshape      indicator boundary data on [-1,1]^2 minus the (0,1]^2 quadrant
  poisson3d   du = 2yz, u = x^2yz on [-1,1]^3, eps 1e-2, 80 steps, 60k starts

Exit codes: 0 success, 2 configuration error, 3 numerical failure.";

#[derive(Parser)]
#[command(name = "wosnn", version, about = "Walk-on-Spheres + network PDE solver", long_about = LONG_ABOUT)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key-value TOML file overriding the preset defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Experiment preset: laplace2d, poisson2d, lshape, or poisson3d.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Global seed; fixes every artifact byte-for-byte.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts and manifests.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sampling worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample WoS paths from uniform starting places into a dataset file.
    Sample,
    /// Train the solution/gradient network on a sampled path dataset.
    Train {
        /// Path dataset (default: <out>/paths.bin).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the grid and report error metrics.
    Eval {
        /// Checkpoint file (default: <out>/model.ckpt).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Classic WoS estimates at every grid node (baseline).
    Wos,
    /// Regression network trained directly on classic WoS outputs (baseline).
    WosNnBaseline,
    /// Finite-difference reference solve on the same grid.
    Fdm,
}

fn run(cli: Cli) -> wosnn::Result<()> {
    let overrides = CliOverrides {
        seed: cli.seed,
        out: cli.out.clone(),
        workers: cli.workers,
    };
    let cfg = RunConfig::resolve(cli.preset.as_deref(), cli.config.as_deref(), &overrides)?;
    if cfg.workers > 0 {
        // Worker count only affects scheduling; ignore re-initialization.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global();
    }
    match cli.command {
        Command::Sample => commands::cmd_sample(&cfg),
        Command::Train { data } => commands::cmd_train(&cfg, data.as_deref()),
        Command::Eval { model } => commands::cmd_eval(&cfg, model.as_deref()),
        Command::Wos => commands::cmd_wos(&cfg),
        Command::WosNnBaseline => commands::cmd_wos_nn_baseline(&cfg),
        Command::Fdm => commands::cmd_fdm(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Input(_) | Error::Io { .. } | Error::Format { .. } => 2,
                Error::Estimation(_) | Error::TrainingDiverged { .. } | Error::Numerical(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}
