//! `fofr`: fit, inference and simulation for function-on-function regression.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numerical failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, read_config_file, Command, Options};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "fofr", version, about, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct SubArgs {
    /// JSON file with option values; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Fit the slope surface and write coefficients and the surface.
    Fit(SubArgs),
    /// Simultaneous bootstrap confidence region for the slope.
    Confband(SubArgs),
    /// Test `β = β_*` by band duality (bt) or the likelihood ratio (plrt).
    TestClassical(SubArgs),
    /// Test the relevant hypothesis `sup|β − β_*| ≤ Δ`.
    TestRelevant(SubArgs),
    /// Simultaneous band for the conditional mean at a new predictor.
    PredictBand(SubArgs),
    /// Penalty eigenvalues, exponents and modes of the predictor sample.
    Eigensystem(SubArgs),
    /// Monte Carlo study on a simulated design.
    Simulate(SubArgs),
    /// Leave-one-out prediction errors.
    LooEval(SubArgs),
}

impl Sub {
    fn split(self) -> (Command, SubArgs) {
        match self {
            Sub::Fit(a) => (Command::Fit, a),
            Sub::Confband(a) => (Command::Confband, a),
            Sub::TestClassical(a) => (Command::TestClassical, a),
            Sub::TestRelevant(a) => (Command::TestRelevant, a),
            Sub::PredictBand(a) => (Command::PredictBand, a),
            Sub::Eigensystem(a) => (Command::Eigensystem, a),
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::LooEval(a) => (Command::LooEval, a),
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {t} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, args) = cli.command.split();
    let opts = match &args.config {
        Some(path) => args.opts.over(read_config_file(path)?),
        None => args.opts,
    };
    configure_threads(opts.threads)?;
    let cfg = parse_config(command, opts)?;
    commands::execute(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
