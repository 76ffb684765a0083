//! Command-line front end: load a scenario, run the pipeline, print a report.
//!
//! Exit codes: 0 on success, 1 for unreadable or invalid input, 2 when a
//! computation stage fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metaconflict::{load_scenario, render_report, run_until, Format, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "metaconflict",
    version,
    about = "Partition nonspecific evidence and derive a posterior over the number of events"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find the partition with minimal metaconflict.
    Partition(RunArgs),
    /// Partition, then specify every piece of evidence against each subset.
    Specify(RunArgs),
    /// Partition, specify, and derive the posterior over the number of events.
    Posterior(RunArgs),
    /// Same as `posterior`.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// `human` or `structured` (JSON).
    #[arg(long, default_value = "human")]
    format: String,
    /// Seed for the random restarts of the local search.
    #[arg(long)]
    seed: Option<u64>,
    /// Largest evidence count for which every partition is enumerated.
    #[arg(long)]
    max_exhaustive: Option<usize>,
    /// Number of hill-climbing restarts.
    #[arg(long)]
    restarts: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::Partition(a) => (Stage::Partition, a),
        Command::Specify(a) => (Stage::Specify, a),
        Command::Posterior(a) | Command::Run(a) => (Stage::Posterior, a),
    };

    let format: Format = match args.format.parse() {
        Ok(f) => f,
        Err(e) => return fail(1, &e),
    };
    let mut scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => return fail(1, &e),
    };
    if let Some(seed) = args.seed {
        scenario.config.rng_seed = seed;
    }
    if let Some(n) = args.max_exhaustive {
        scenario.config.max_exhaustive_n = n;
    }
    if let Some(n) = args.restarts {
        scenario.config.restarts = n;
    }
    if let Err(e) = scenario.config.validate() {
        return fail(1, &e);
    }

    match run_until(&scenario, stage) {
        Ok(report) => {
            print!("{}", render_report(&report, format));
            ExitCode::SUCCESS
        }
        Err(e) => fail(2, &e),
    }
}

fn fail(code: u8, err: &dyn std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}
