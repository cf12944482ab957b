use std::path::PathBuf;
use std::process::ExitCode;

use ambmerton::config::{resolve, split_overrides};
use ambmerton::{run, CliError, CliResult, Command};
use clap::{Args, Parser, Subcommand};

/// Optimal fractions, values and diagnostics for Merton investors who learn
/// an uncertain drift.
///
/// Any config field can be overridden with a dotted flag, e.g.
/// `--prefs.alpha -1` or `--query.T=20`.
#[derive(Parser)]
#[command(name = "ambmerton", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal fraction at (t, T, Y)
    Fraction(Common),
    /// Weights on the two Merton fractions
    Weight(Common),
    /// Value of the optimal strategy
    Value(Common),
    /// Optimal constant fraction
    Precommit(Common),
    /// Ambiguity-adjusted prior
    Adjust(Common),
    /// Log investor's value of learning
    LearningValue(Common),
    /// Monte Carlo utility of a strategy
    Simulate(Common),
    /// One-axis parameter sweep as CSV
    Sweep(Common),
    /// Strategy paths along a price file as CSV
    Backtest(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; missing fields take the benchmark defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named sweep (fig1, fig2, fig7, fig8)
    #[arg(long)]
    preset: Option<String>,
    /// Output file (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::Fraction(c) => (Command::Fraction, c),
            Cmd::Weight(c) => (Command::Weight, c),
            Cmd::Value(c) => (Command::Value, c),
            Cmd::Precommit(c) => (Command::Precommit, c),
            Cmd::Adjust(c) => (Command::Adjust, c),
            Cmd::LearningValue(c) => (Command::LearningValue, c),
            Cmd::Simulate(c) => (Command::Simulate, c),
            Cmd::Sweep(c) => (Command::Sweep, c),
            Cmd::Backtest(c) => (Command::Backtest, c),
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn real_main() -> CliResult<()> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    ambmerton::parallel::init_threads()?;
    let (cmd, common) = cli.command.split();

    let file = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let mut cfg = resolve(common.preset.as_deref(), file, &overrides)?;
    if common.out.is_some() {
        cfg.output = common.out;
    }

    let out = run(cmd, &cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.output {
        Some(path) => std::fs::write(path, &out.text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?,
        None => print!("{}", out.text),
    }
    Ok(())
}
