mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ecotopics",
    version,
    about = "Community models of daily taxon counts"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse counts (and optionally environment readings) into clean tables.
    Ingest(IngestArgs),
    /// Train one community model.
    Train(TrainArgs),
    /// Train a grid of models and keep the one with the lowest held-out error.
    Sweep(SweepArgs),
    /// Compare the community, direct and PCA pipelines year by year.
    Evaluate(EvaluateArgs),
    /// Predict one day's community mixture and taxon distribution from raw readings.
    Predict(PredictArgs),
    /// Write plot-ready tables for a trained model.
    Export(ExportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Daily taxon counts, wide (`date,<taxa>...`) or long (`date,taxon,count`).
    #[arg(long)]
    counts: PathBuf,
    /// Raw environment readings, first column a timestamp.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Feature configuration JSON (cyclic columns, dropped columns, MAD cutoff).
    #[arg(long, requires = "env")]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = ecotopics_core::Hyperparameters::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = ecotopics_core::Hyperparameters::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = ecotopics_core::Hyperparameters::default().gamma)]
    gamma: f64,
    /// Smoothing half-window in calendar days.
    #[arg(long = "g", default_value_t = ecotopics_core::Hyperparameters::default().g_radius)]
    g_radius: u32,
    #[arg(long, default_value_t = ecotopics_core::Hyperparameters::default().max_communities)]
    max_communities: usize,
    #[arg(long, default_value_t = ecotopics_core::Hyperparameters::default().n_sweeps)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Ridge penalties to choose from, as a JSON array or a file holding one.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sweep configuration, as JSON or a file holding it.
    #[arg(long)]
    grid: String,
    /// Overrides the grid's sweep count.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Overrides the grid's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the grid's lambda grid.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON trained on the same counts.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Regressor JSON written by `train --env`.
    #[arg(long)]
    regressor: PathBuf,
    /// Raw readings keyed by column name, as JSON or a file holding it.
    #[arg(long)]
    readings: String,
    /// Day the readings belong to (YYYY-MM-DD).
    #[arg(long)]
    date: chrono::NaiveDate,
    /// Also write the prediction into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    regressor: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Predict(a) => commands::predict(a),
        Command::Export(a) => commands::export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
