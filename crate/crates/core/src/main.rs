//! Command-line front end: fit copula regression models described by a
//! config file, predict joint probabilities, draw reference data, run the
//! replicated selection study, and compute residual diagnostics.

mod cli;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cli::commands::{self, ProbMode};
use copreg::error::Error;

#[derive(Parser)]
#[command(name = "copreg", version, about = "Bivariate copula regression with smooth additive predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model described by a config file; writes a self-contained
    /// output directory (fit.txt, train.csv, summary.txt).
    Fit {
        /// Model configuration file
        #[arg(long)]
        config: PathBuf,
        /// Training data CSV (overrides the config's `data =` line)
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict P(Y1 <= y1, Y2 <= y2) per observation from a saved fit.
    Predict {
        /// fit.txt written by `fit`
        #[arg(long)]
        fit: PathBuf,
        /// Covariate CSV; defaults to the training data
        #[arg(long)]
        data: Option<PathBuf>,
        /// Threshold for the first response
        #[arg(long)]
        y1: f64,
        /// Threshold for the second response
        #[arg(long)]
        y2: f64,
        /// Which probability the intervals are computed for
        #[arg(long, value_enum, default_value_t = Mode::Copula)]
        mode: Mode,
        /// Add 95% posterior intervals
        #[arg(long)]
        intervals: bool,
        /// Posterior draws for the intervals
        #[arg(long, default_value_t = 200)]
        nsim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a dataset from the reference simulation design.
    Simulate {
        /// Number of rows
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replicated model-selection experiment over candidate copulas.
    Simstudy {
        /// Sample size per replicate
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Number of replicates
        #[arg(long, default_value_t = 25)]
        nsim: usize,
        /// Comma-separated candidate copula tags (default: the standard eight)
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Grid points for the fitted-smooth exports
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Normal-score residual diagnostics for a saved fit.
    Diagnose {
        /// fit.txt written by `fit`
        #[arg(long)]
        fit: PathBuf,
        /// Data CSV with the response columns; defaults to the training data
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Copula,
    Independence,
}

fn run(cmd: Command) -> copreg::error::Result<()> {
    match cmd {
        Command::Fit { config, data, out } => commands::cmd_fit(&config, data.as_deref(), &out),
        Command::Predict {
            fit,
            data,
            y1,
            y2,
            mode,
            intervals,
            nsim,
            seed,
            out,
        } => commands::cmd_predict(
            &fit,
            data.as_deref(),
            y1,
            y2,
            match mode {
                Mode::Copula => ProbMode::Copula,
                Mode::Independence => ProbMode::Independence,
            },
            intervals,
            nsim,
            seed,
            out.as_deref(),
        ),
        Command::Simulate { n, seed, out } => commands::cmd_simulate(n, seed, out.as_deref()),
        Command::Simstudy {
            n,
            nsim,
            candidates,
            seed,
            grid,
            threads,
            out,
        } => {
            if let Some(t) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build_global()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            }
            commands::cmd_simstudy(n, nsim, &candidates, seed, grid, &out)
        }
        Command::Diagnose { fit, data, out } => {
            commands::cmd_diagnose(&fit, data.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numerical(_) => 2,
                Error::NonConvergence(_) => 3,
                _ => 1,
            })
        }
    }
}
