use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smpsim_cli::commands::{run_command, CommandKind, Overrides};
use smpsim_cli::run_config::RunConfig;
use smpsim_cli::CliError;

/// Semi-Markov process simulator: point-measure-driven paths, an
/// independent direct sampler, coupled pairs, and verification suites.
#[derive(Parser)]
#[command(name = "smpsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write them as CSV plus a summary.
    Simulate(CommonArgs),
    /// Run the statistical verification suites and write verdicts.
    Verify(CommonArgs),
    /// Simulate coupled pairs on one shared stream; report meeting,
    /// merging, and generator checks.
    Couple(CommonArgs),
    /// Tabulate the holding-time cdf, kernel, and embedded matrix on an
    /// age grid.
    Kernel(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config out_dir, then ./smpsim-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replication parallelism (default: config threads, then 1).
    #[arg(long)]
    threads: Option<usize>,
}

fn dispatch(kind: CommandKind, args: &CommonArgs) -> Result<bool, CliError> {
    let bytes = std::fs::read(&args.config).map_err(|e| CliError::Io {
        path: args.config.display().to_string(),
        source: e,
    })?;
    let config = RunConfig::from_json_bytes(&bytes)?;
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        threads: args.threads,
    };
    let outcome = run_command(kind, config, overrides)?;
    if outcome.checks_passed {
        eprintln!("ok: outputs in {}", outcome.out_dir.display());
    } else {
        eprintln!(
            "check failures recorded in {}",
            outcome.out_dir.display()
        );
    }
    Ok(outcome.checks_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Verify(a) => (CommandKind::Verify, a),
        Command::Couple(a) => (CommandKind::Couple, a),
        Command::Kernel(a) => (CommandKind::Kernel, a),
    };
    match dispatch(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2))
        }
    }
}
