//! Configuration-driven entry point behind the `fracpow` binary.
//!
//! ```text
//! fracpow <solve|dtn apply|dtn resolve|evolve|verify|converge> --config PATH [--out DIR] [--seed N] [--jobs K]
//! ```
//!
//! Artifacts go to `<out>/<command>/<run name>/` together with `summary.json`
//! and a `manifest.json` recording the SHA-256 of the configuration.

mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use config::RunConfig;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "fracpow",
    version,
    about = "Fractional powers of monotone operators through the extension problem"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for samplers; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent sweep points.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Dirichlet or Robin extension solve with the estimate audit.
    Solve,
    /// The Dirichlet-to-Neumann operator or its resolvent.
    Dtn {
        #[command(subcommand)]
        mode: DtnMode,
    },
    /// Semigroup trajectory by the exponential formula.
    Evolve,
    /// Oracle comparisons and property checks.
    Verify,
    /// Mesh and substep refinement tables.
    Converge,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum DtnMode {
    Apply,
    Resolve,
}

impl Command {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Dtn {
                mode: DtnMode::Apply,
            } => "dtn_apply",
            Command::Dtn {
                mode: DtnMode::Resolve,
            } => "dtn_resolve",
            Command::Evolve => "evolve",
            Command::Verify => "verify",
            Command::Converge => "converge",
        }
    }
}

/// Outcome of a command: where it wrote, and whether every check passed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub pass: bool,
}

/// Loads the configuration and executes the command.
pub fn run(cli: &Cli) -> Result<RunOutcome> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config", "required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("--jobs", e.to_string()))?;
    pool.install(|| execute(cli.command, &cfg, &cli.out))
}

/// Executes `command` for an already parsed configuration.
pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let dir = out.join(command.dir_name()).join(&cfg.name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    let (summary, pass) = match command {
        Command::Solve => commands::solve(cfg, &dir)?,
        Command::Dtn {
            mode: DtnMode::Apply,
        } => commands::dtn_apply(cfg, &dir)?,
        Command::Dtn {
            mode: DtnMode::Resolve,
        } => commands::dtn_resolve(cfg, &dir)?,
        Command::Evolve => commands::evolve(cfg, &dir)?,
        Command::Verify => commands::verify(cfg, &dir)?,
        Command::Converge => commands::converge(cfg, &dir)?,
    };
    write_json(
        &dir.join("summary.json"),
        &json!({ "pass": pass, "results": summary }),
    )?;
    let manifest = json!({
        "command": command.dir_name(),
        "name": cfg.name,
        "config_sha256": cfg.hash,
        "seed": cfg.seed,
        "s_values": cfg.s_values,
        "files": list_files(&dir)?,
        "pass": pass,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome { dir, pass })
}

pub(crate) fn write_json(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn list_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, acc: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, acc)?;
            } else if let Ok(rel) = path.strip_prefix(root) {
                acc.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    Ok(files)
}
