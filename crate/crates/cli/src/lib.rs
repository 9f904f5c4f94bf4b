//! Command-line experiments for the leaking standard map.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::Config;
use crate::output::{OutputDir, RunManifest};

/// Environment variable fixing the worker thread count.
pub const THREADS_ENV: &str = "LEAKMAP_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", format_list(.0))]
    Config(Vec<String>),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerical(#[from] leakmap::Error),
    #[error("numerical check failed: {0}")]
    Check(String),
}

fn format_list(items: &[String]) -> String {
    items.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    /// `1` for configuration and output problems, `2` for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Numerical(leakmap::Error::Io(_)) => 1,
            CliError::Numerical(_) | CliError::Check(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "leakmap", version, about = "Classical and quantum standard map with a leak")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-map FTLE field and strip-mean FTLE scan.
    FtleField(RunArgs),
    /// Dwell times, FTLEs and survival of the leaking classical map.
    OpenClassical(RunArgs),
    /// Resonance spectrum, mean Husimi distribution and Wehrl entropies.
    Quantum(RunArgs),
    /// Leak-position scan of ⟨τ⟩, ⟨λ⟩, ⟨T⟩ and ⟨S_W⟩.
    Scan(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides such as `--leak.center 0.5` or `--n=256`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    pub overrides: Vec<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FtleField(_) => "ftle-field",
            Command::OpenClassical(_) => "open-classical",
            Command::Quantum(_) => "quantum",
            Command::Scan(_) => "scan",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::FtleField(a) | Command::OpenClassical(a) | Command::Quantum(a) | Command::Scan(a) => a,
        }
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`] if it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(vec![format!("{THREADS_ENV} must be a positive integer, got `{value}`")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(vec![format!("{THREADS_ENV}: {e}")]))
}

pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let args = cli.command.args();
    let overrides = config::parse_override_args(&args.overrides)?;
    let cfg = Config::load(args.config.as_deref(), &overrides)?;
    run_config(cli.command.name(), &cfg)
}

/// Runs one experiment by name into `cfg.run.output_dir`.
pub fn run_config(command: &str, cfg: &Config) -> Result<RunManifest, CliError> {
    let mut out = OutputDir::create(&cfg.run.output_dir)?;
    log::info!("{command}: writing to {}", out.path().display());
    out.write("config.toml", |w| {
        use std::io::Write;
        w.write_all(cfg.to_toml().as_bytes())?;
        Ok(())
    })?;
    let results = match command {
        "ftle-field" => commands::ftle_field(cfg, &mut out)?,
        "open-classical" => commands::open_classical(cfg, &mut out)?,
        "quantum" => commands::quantum(cfg, &mut out)?,
        "scan" => commands::scan(cfg, &mut out)?,
        other => return Err(CliError::Config(vec![format!("unknown command {other}")])),
    };
    out.finish(command, cfg, results)
}
