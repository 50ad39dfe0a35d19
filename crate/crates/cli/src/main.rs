//! `online-riccati` command-line front-end.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use online_riccati::Error;

#[derive(Debug, Parser)]
#[command(name = "online-riccati", version, about = "Online Riccati updates for online linear-quadratic control")]
struct Cli {
    /// Progress output on stderr; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a DARE given a matrix file holding A, B, Q and R.
    SolveDare {
        input: PathBuf,
        /// Also write P and K as matrix blocks to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the online algorithm on one cost stream and write a per-round CSV.
    RunOnline(RunArgs),
    /// Run the online algorithm and both baselines over several trials.
    Bench(RunArgs),
    /// Track the largest eigenvalue of the value matrices over many cost streams.
    ProbeBounds(ProbeArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (output directory for `bench`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    /// State and input dimensions, e.g. `4,3`.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<(usize, usize)>,
    #[arg(long)]
    trials: Option<usize>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Cost scenario: 1, 2, 3 or constant.
    #[arg(long)]
    experiment: Option<String>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s.split_once(',').ok_or_else(|| format!("expected `n,m`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad dimension `{v}`: {e}"));
    Ok((parse(n)?, parse(m)?))
}

/// An error paired with the process exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotStabilizable(_) | Error::Generation(_) => 2,
            Error::InvariantViolation { .. } | Error::UnstableClosedLoop { .. } | Error::ResetDivergence { .. } => 3,
            _ => 1,
        };
        Self { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap reserves 2 for usage errors; here 2 means "not stabilizable"
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::SolveDare { input, out } => commands::solve_dare(&input, out.as_deref()),
        Command::RunOnline(args) => commands::run_online(&args.common, args.experiment.as_deref(), cli.verbose),
        Command::Bench(args) => commands::bench(&args.common, args.experiment.as_deref(), cli.verbose),
        Command::ProbeBounds(args) => commands::probe_bounds(&args.common, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
