//! `lyapnet` — finite-time Lyapunov analysis of layered networks from the
//! command line.
//!
//! Four subcommands cover the workflow end to end: `generate` draws a
//! seeded random network, `train` fits a small MLP on a synthetic task,
//! `analyze` turns network + input states into FTLE spectra and a dynamics
//! classification, and `experiment` runs one of the batch studies.
//!
//! Exit codes: 0 on success, 2 for anything the caller can fix (bad flags,
//! malformed configs, dimension mismatches), 3 for numerical failures
//! (overflowing forward passes, diverging training runs).
//!
//! All results go to the paths given on the command line; progress and
//! summaries go to stderr, so stdout stays clean for shell pipelines.

mod commands;
mod configs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::ExperimentName;
use lyapnet::trainer::DatasetKind;

#[derive(Parser)]
#[command(
    name = "lyapnet",
    version,
    about = "Finite-time Lyapunov exponents for layered networks",
    long_about = "Treats a feedforward network as a discrete dynamical system: chains the \
                  per-layer Jacobians along a trajectory, extracts the singular-value spectrum \
                  of the product in log space, and classifies the dynamics as regular, chaotic, \
                  or hyperchaotic."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute FTLE spectra and dynamics classes for each input state.
    Analyze {
        /// Network JSON file (as written by `generate` or `train`).
        #[arg(long)]
        network: PathBuf,
        /// Headerless CSV of input states, one row per state.
        #[arg(long)]
        inputs: PathBuf,
        /// Composition depth j >= 1 (default: the full network depth).
        #[arg(long)]
        depth: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a seeded random network and write it as JSON.
    Generate {
        /// Generator config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output network JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an MLP on a synthetic dataset and write the result as JSON.
    Train {
        /// Training config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Synthetic task to fit.
        #[arg(long, value_enum)]
        data_kind: DataKindArg,
        /// Output network JSON path; loss history lands at `<out>.loss.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a batch study, writing `<study>.csv` + `<study>.meta.json`.
    Experiment {
        /// Which study to run.
        #[arg(value_enum)]
        name: ExperimentName,
        /// Study config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Directory for the CSV + metadata pair.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// CLI spelling of the synthetic tasks.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum DataKindArg {
    NoisySine,
    TwoClusters,
}

impl From<DataKindArg> for DatasetKind {
    fn from(kind: DataKindArg) -> Self {
        match kind {
            DataKindArg::NoisySine => DatasetKind::NoisySine,
            DataKindArg::TwoClusters => DatasetKind::TwoClusters,
        }
    }
}

/// Apply `LYAPNET_THREADS` before any parallel work starts. Unset means
/// rayon's default (one worker per core); anything set must parse as a
/// positive integer — a typo silently falling back to all cores would make
/// benchmark numbers lie.
fn configure_threads() -> Result<(), u8> {
    let raw = match std::env::var("LYAPNET_THREADS") {
        Ok(raw) => raw,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => {
            eprintln!("error: LYAPNET_THREADS is not valid unicode");
            return Err(2);
        }
    };
    let threads: usize = match raw.trim().parse() {
        Ok(n) if n >= 1 => n,
        _ => {
            eprintln!("error: LYAPNET_THREADS must be a positive integer, got {raw:?}");
            return Err(2);
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| {
            eprintln!("error: could not configure {threads} worker thread(s): {e}");
            3
        })
}

fn run() -> u8 {
    let cli = Cli::parse();
    if let Err(code) = configure_threads() {
        return code;
    }
    let result = match cli.command {
        Command::Analyze {
            network,
            inputs,
            depth,
            out,
        } => commands::cmd_analyze(&network, &inputs, depth, &out),
        Command::Generate { config, out } => commands::cmd_generate(&config, &out),
        Command::Train {
            config,
            data_kind,
            out,
        } => commands::cmd_train(&config, data_kind.into(), &out),
        Command::Experiment {
            name,
            config,
            out_dir,
        } => commands::cmd_experiment(name, &config, &out_dir),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                2
            } else {
                3
            }
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
