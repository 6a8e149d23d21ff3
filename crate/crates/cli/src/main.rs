use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oneshot_cli::error::EXIT_VALIDATION;
use oneshot_cli::report::write_rows;
use oneshot_cli::{config, run, CliError, Format, Mode, Result};

/// Evaluate one-shot achievability bounds, simulate the random codes, and
/// compute second-order rates.
#[derive(Parser)]
#[command(name = "oneshot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower bound on the success probability and per-gamma error bounds.
    Bound(Common),
    /// Monte Carlo estimate of the random code's success probability.
    Simulate(Common),
    /// Second-order achievable rate (p2p, gelfand_pinsker) or region test (marton2).
    Rate(Common),
    /// Second-order region membership of a rate pair (marton2).
    Region(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Monte Carlo trials, overriding the config.
    #[arg(long)]
    trials: Option<u64>,
    /// Random seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated gamma values, overriding the config.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    gamma: Option<Vec<f64>>,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("ONESHOT_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::invalid(format!(
                "ONESHOT_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        _ => Ok(None),
    }
}

fn execute(mode: Mode, args: Common) -> Result<()> {
    let threads = threads_from_env()?;
    let mut cfg = config::load(&args.config)?;
    cfg.override_with(args.trials, args.seed, args.gamma);
    let prepared = cfg.prepare()?;
    let rows = run(&prepared, mode, threads)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path)?;
            write_rows(&rows, args.format, file)?;
        }
        None => {
            let stdout = std::io::stdout().lock();
            write_rows(&rows, args.format, stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (mode, args) = match cli.command {
        Command::Bound(a) => (Mode::Bound, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Rate(a) => (Mode::Rate, a),
        Command::Region(a) => (Mode::Region, a),
    };
    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
