use clap::{Parser, Subcommand};
use ilcbench::config::parse_config;
use ilcbench::experiment::{
    run_analyze, run_check, run_experiment, run_profile, ExperimentOutcome, RunError, EXIT_CONFIG,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Batch runner for learning feedforward experiments on virtual motion
/// benches.
///
/// Exit codes: 0 success, 2 configuration error, 3 divergence,
/// 4 certification failure.
#[derive(Parser)]
#[command(name = "ilcbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output root; defaults to $ILCBENCH_OUT, then ./ilcbench-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the scenario's RNG seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Certify contraction of the configured design; no simulation.
    Check(CommonArgs),
    /// Run the full learning experiment.
    Run(CommonArgs),
    /// Run the repeated-task ensemble decomposition only.
    Analyze(CommonArgs),
    /// Emit the configured reference trajectory as CSV.
    Profile(CommonArgs),
}

fn out_root(args: &CommonArgs) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Ok(env) = std::env::var("ILCBENCH_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("ilcbench-out")
}

fn experiment_dir(args: &CommonArgs) -> PathBuf {
    let stem = args
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    out_root(args).join(stem)
}

fn load(path: &Path) -> Result<ilcbench::config::ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn dispatch(command: &Command) -> Result<ExperimentOutcome, RunError> {
    match command {
        Command::Check(args) => {
            let cfg = load(&args.config)?;
            run_check(&cfg, &experiment_dir(args), args.quiet)
        }
        Command::Run(args) => {
            let cfg = load(&args.config)?;
            run_experiment(&cfg, &experiment_dir(args), args.seed_override, args.quiet)
        }
        Command::Analyze(args) => {
            let cfg = load(&args.config)?;
            run_analyze(&cfg, &experiment_dir(args), args.seed_override, args.quiet)
        }
        Command::Profile(args) => {
            let cfg = load(&args.config)?;
            run_profile(&cfg, &experiment_dir(args), args.quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(outcome) => ExitCode::from(outcome.exit_code),
        Err(RunError::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e @ RunError::Io(_)) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
        Err(RunError::Core(e)) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
