//! Experiment runner for the `lerw` library.
//!
//! Each subcommand takes flags and/or a JSON config file, runs one
//! verification or simulation and returns a [`Report`]: pass/fail checks,
//! summary values and output files (CSV tables, text dumps), written next to
//! a `summary.json` that embeds the effective config, its SHA-256 and the
//! seed. Outputs never depend on the worker count.

pub mod args;
pub mod commands;
pub mod config;
pub mod report;

use std::fmt;
use std::path::PathBuf;

use serde_json::{Map, Value};

pub use args::{Cli, Command};
pub use report::Report;

use config::{auto_seed, merge, read_config_file, Mode};

pub const DEFAULT_OUT_DIR: &str = "lerw-out";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Usage(String),
    Library(lerw::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lerw::Error> for CliError {
    fn from(e: lerw::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("bad configuration: {e}"))
    }
}

/// Resolved run-wide settings.
#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub seed: u64,
    /// `None` when neither flags nor config chose one.
    pub mode: Option<Mode>,
    pub workers: usize,
}

/// A parsed invocation with its config merged and ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub command: Command,
    pub context: Context,
    /// Config file values overlaid with flags.
    pub params: Value,
    pub out_dir: PathBuf,
    /// Whether the seed was drawn rather than given.
    pub seed_was_drawn: bool,
}

impl Prepared {
    pub fn randomized(&self) -> bool {
        matches!(
            self.command,
            Command::VerifyTheorem1(_) | Command::VerifyGreen(_) | Command::Simulate(_) | Command::Converge(_)
        )
    }
}

fn command_flags(command: &Command) -> Result<Value, CliError> {
    Ok(match command {
        Command::VerifyTheorem1(a) => serde_json::to_value(a)?,
        Command::VerifyGreen(a) => serde_json::to_value(a)?,
        Command::Graph(a) => serde_json::to_value(a)?,
        Command::Resist(a) => serde_json::to_value(a)?,
        Command::Simulate(a) => serde_json::to_value(a)?,
        Command::Converge(a) => serde_json::to_value(a)?,
        Command::ExactLaw(a) => serde_json::to_value(a)?,
    })
}

pub fn prepare(cli: &Cli) -> Result<Prepared, CliError> {
    let file = match &cli.global.config {
        Some(path) => read_config_file(path)?,
        None => Value::Object(Map::new()),
    };
    let flags = merge(serde_json::to_value(&cli.global)?, command_flags(&cli.command)?);
    let params = merge(file, flags);
    let global: args::GlobalArgs = serde_json::from_value(params.clone())?;
    let (seed, seed_was_drawn) = match global.seed {
        Some(s) => (s, false),
        None => (auto_seed(), true),
    };
    let out_root = cli.global.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok(Prepared {
        out_dir: out_root.join(cli.command.name()),
        command: cli.command.clone(),
        context: Context {
            seed,
            mode: global.mode,
            workers: global.workers.unwrap_or(0),
        },
        params,
        seed_was_drawn,
    })
}

pub fn run(prepared: &Prepared) -> Result<Report, CliError> {
    let ctx = &prepared.context;
    let p = prepared.params.clone();
    match &prepared.command {
        Command::VerifyTheorem1(_) => commands::verify::theorem1(ctx, &serde_json::from_value(p)?),
        Command::VerifyGreen(_) => commands::verify::green(ctx, &serde_json::from_value(p)?),
        Command::Graph(_) => commands::fractal::graph(ctx, &serde_json::from_value(p)?),
        Command::Resist(_) => commands::fractal::resist(ctx, &serde_json::from_value(p)?),
        Command::Simulate(_) => commands::fractal::simulate(ctx, &serde_json::from_value(p)?),
        Command::Converge(_) => commands::fractal::converge(ctx, &serde_json::from_value(p)?),
        Command::ExactLaw(_) => commands::exact::exact_law(ctx, &serde_json::from_value(p)?),
    }
}

/// Parse-free entry point used by tests: prepare, run and write.
pub fn execute(cli: &Cli) -> Result<(Report, PathBuf), CliError> {
    let prepared = prepare(cli)?;
    let report = run(&prepared)?;
    report.write_to(&prepared.out_dir)?;
    Ok((report, prepared.out_dir))
}
