mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "goalswap", version, about = "Offline goal-conditioned RL with goal-swapping augmentation")]
struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the expert dataset.
    GenDataset(GenArgs),
    /// Train a learner on a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Welch t-test between two sets of evaluation reports.
    Compare(CompareArgs),
    /// Finite-difference gradient checks.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output JSON-Lines file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_per_path: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Maze layout file.
    #[arg(long)]
    layout: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Dqapg,
    Td3bc,
    Gcsl,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    RandomCombo,
    FixedGrid,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Goal-swapping augmentation.
    #[arg(long, value_enum)]
    aug: Option<Toggle>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint directory holding a manifest.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; defaults to eval_<mode>.json next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-episode trace CSVs.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Reports of the first group, one per seed.
    #[arg(long, num_args = 2.., required = true)]
    a: Vec<PathBuf>,
    /// Reports of the second group, one per seed.
    #[arg(long, num_args = 2.., required = true)]
    b: Vec<PathBuf>,
    /// Pooled-variance t-test instead of Welch.
    #[arg(long)]
    pooled: bool,
    /// Result file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturb the analytic gradients; every check should then fail.
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
