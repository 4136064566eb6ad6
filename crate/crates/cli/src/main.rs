//! `tgp`: train, evaluate and inspect tensor-GP models.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 input or configuration error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BenchSweep, Globals};
use config::Shading;

#[derive(Parser)]
#[command(name = "tgp", version, about = "Tensor-GP regression and collaborative filtering")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dataset root; defaults to $TGP_DATA_DIR, then ./data.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Output directory; overrides the configuration's output.dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the model described by --config.
    Train,
    /// RMSE of a saved model on labelled data, with percentile bands for sampled models.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Ratings file for rating models, headered CSV for regression models.
        #[arg(long)]
        data: PathBuf,
        /// Target column of a regression CSV when no --config is given.
        #[arg(long)]
        target: Option<String>,
    },
    /// Predictions of a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Tab-separated user and item ids, or a headered covariate CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Additive components of a two-covariate regression model over a query grid.
    Decompose {
        #[arg(long)]
        model: PathBuf,
        /// `lo:hi:n,lo:hi:n` for the first and second covariate.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum)]
        shading: Option<Shading>,
        /// Largest accepted component count r^D.
        #[arg(long, default_value_t = 64)]
        limit: usize,
    },
    /// Split R-hat and ESS per parameter of a chains table.
    Diagnose {
        /// CSV with columns chain,iter,<parameters>.
        #[arg(long)]
        chains: PathBuf,
    },
    /// Median gradient time over a sweep of minibatch size, features, rank and order.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
        m: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "8")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        r: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        d: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = Globals {
        config: cli.config,
        seed: cli.seed,
        data_dir: cli.data_dir,
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Train => commands::train(&g),
        Command::Eval { model, data, target } => commands::eval(&g, &model, &data, target.as_deref()),
        Command::Predict { model, input, target } => commands::predict(&g, &model, &input, target.as_deref()),
        Command::Decompose {
            model,
            grid,
            shading,
            limit,
        } => commands::decompose(&g, &model, &grid, shading, limit),
        Command::Diagnose { chains } => commands::diagnose(&g, &chains),
        Command::Bench { m, n, r, d, repeats } => commands::bench(&g, &BenchSweep { m, n, r, d, repeats }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
