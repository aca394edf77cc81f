//! `ftl-homog`: command-line driver for follow-the-leader homogenization
//! experiments.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

/// Seed override read when `--seed` is absent.
const SEED_ENV: &str = "FTL_HOMOG_SEED";

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or unreadable config: exit code 2.
    Usage(String),
    /// Domain, assumption, or run failure: exit code 1.
    Failure(String),
}

impl From<ftl_homog::Error> for CliError {
    fn from(e: ftl_homog::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "ftl-homog",
    version,
    about = "Heterogeneous follow-the-leader traffic and its macroscopic limit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model assumptions for the configured type law.
    Validate(Common),
    /// Tabulate the effective velocity and the fundamental diagram.
    BuildFlux(Common),
    /// Integrate the car-following system.
    Simulate(Common),
    /// Solve the macroscopic equation (and optionally its density form).
    SolveMacro(Common),
    /// Run a micro-macro convergence study.
    Converge(Common),
    /// Compare long-time micro speeds with the effective velocity.
    FundamentalDiagram(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to [output] dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed override; takes precedence over FTL_HOMOG_SEED.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for parallel studies.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cmd, common) = match &cli.command {
        Command::Validate(c) => ("validate", c),
        Command::BuildFlux(c) => ("build-flux", c),
        Command::Simulate(c) => ("simulate", c),
        Command::SolveMacro(c) => ("solve-macro", c),
        Command::Converge(c) => ("converge", c),
        Command::FundamentalDiagram(c) => ("fundamental-diagram", c),
    };
    if let Some(n) = common.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
    }
    let path = common.config.display().to_string();
    let bytes = std::fs::read(&common.config).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Usage(format!("{path}: not UTF-8")))?;
    let mut cfg = config::parse(&text, &path)?;
    let seed = seed_override(common.seed)?;
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    cfg.check()?;
    if cmd == "validate" {
        return commands::validate(&cfg, common.quiet);
    }
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let out = output::OutDir::create(dir, output::scenario_hash(&bytes, seed), common.quiet)?;
    match cmd {
        "build-flux" => commands::build_flux_cmd(&cfg, &out),
        "simulate" => commands::simulate(&cfg, &out),
        "solve-macro" => commands::solve_macro(&cfg, &out),
        "converge" => commands::converge(&cfg, &out),
        _ => commands::fundamental_diagram(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
