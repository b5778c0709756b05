use std::path::PathBuf;
use std::process::ExitCode;

use bouts_core::par::with_jobs;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::{CliError, Overrides};

#[derive(Parser)]
#[command(name = "bouts", version, about = "Universal and task-specific feature selection with boosted trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model on a seeded split and report selections and test error.
    Fit(Overrides),
    /// Sweep the feature penalty over a log grid and pick one by the
    /// explained-variance cutoff.
    Path(Overrides),
    /// Refit on many random splits and compare selection stability.
    Stability(Overrides),
    /// Write a synthetic category with planted features.
    Synth(SynthArgs),
    /// Predict a task CSV with a model written by `fit`.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NonlinearityArg {
    Linear,
    Quadratic,
    Interaction,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the task CSVs, manifest.json and truth.json.
    #[arg(long)]
    out: PathBuf,
    /// Generator seed (0 unless given or set in --spec).
    #[arg(long)]
    seed: Option<u64>,
    /// JSON generator spec; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    universal: Option<usize>,
    #[arg(long)]
    task_specific: Option<usize>,
    /// Rows per task: one value for all tasks or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    samples: Vec<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, value_enum)]
    nonlinearity: Option<NonlinearityArg>,
    #[arg(long)]
    correlation: Option<f64>,
    #[arg(long)]
    shared_fraction: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    /// model.json written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Task CSV in the training format (id, features, target).
    #[arg(long)]
    input: PathBuf,
    /// Task to predict; optional for single-task models.
    #[arg(long)]
    task: Option<String>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(o) => {
            let cfg = o.resolve()?;
            with_jobs(cfg.jobs, || commands::fit(&cfg))
        }
        Command::Path(o) => {
            let cfg = o.resolve()?;
            with_jobs(cfg.jobs, || commands::path(&cfg))
        }
        Command::Stability(o) => {
            let cfg = o.resolve()?;
            with_jobs(cfg.jobs, || commands::stability(&cfg))
        }
        Command::Synth(a) => commands::synth(&a),
        Command::Predict(a) => commands::predict(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
