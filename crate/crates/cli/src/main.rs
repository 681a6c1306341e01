use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noise_forge_cli::config::{parse_config, Mode, Overrides};
use noise_forge_cli::pipeline::run_pipeline;
use noise_forge_cli::CliError;

#[derive(Parser)]
#[command(name = "noise-forge", version, about = "Run noise-assisted open-system experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark the device and reconstruct its Pauli channels.
    Characterize(Args),
    /// Compute mitigation factors and quasi-probabilities.
    Plan(Args),
    /// Run the noisy device without mitigation.
    Simulate(Args),
    /// Run partial error cancellation and compare with the reference solver.
    Mitigate(Args),
    /// Tabulate mitigation costs.
    Cost(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    svg: Toggle,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Toggle {
    On,
    Off,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Characterize(a) => (Mode::Characterize, a),
        Command::Plan(a) => (Mode::Plan, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Mitigate(a) => (Mode::Mitigate, a),
        Command::Cost(a) => (Mode::Cost, a),
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match run(mode, &args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn run(mode: Mode, args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let overrides = Overrides {
        mode: Some(mode),
        seed: args.seed,
    };
    let cfg = match &args.config {
        Some(path) => parse_config(path, &overrides),
        None if mode == Mode::Cost => {
            noise_forge_cli::config::parse_config_str(r#"{"mode": "cost"}"#, ".".as_ref(), &overrides)
        }
        None => Err(vec![noise_forge_cli::config::Violation {
            path: "--config".into(),
            message: format!("{mode} needs a config file"),
        }]),
    }
    .map_err(CliError::Config)?;
    let artifacts = run_pipeline(&cfg, args.svg == Toggle::On)?;
    artifacts.write(&args.out)
}

/// `NOISE_FORGE_THREADS` caps the worker pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NOISE_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(vec![noise_forge_cli::config::Violation {
            path: "NOISE_FORGE_THREADS".into(),
            message: format!("expected a positive integer, got {v:?}"),
        }])
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::output("thread pool", e))
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}
