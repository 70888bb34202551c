//! `starkfloq <spectrum|bloch|exponent|sim2d|sweep> --config <file> [--set k=v]... --out <dir>`
//!
//! Every run writes its CSV files, a `report.json` and, last, a
//! `manifest.json` listing each output with its SHA-256 digest. Passing a
//! manifest back as `--config` replays the run.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::Error;
use config::{from_value, resolve_value, CommandKind};
use manifest::{now_rfc3339, OutputEntry, OutputSink};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{0}")]
    Io(String),
    #[error("{failed} of {total} sweep points failed")]
    Sweep { failed: usize, total: usize, numerical: bool },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Model(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Model(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Sweep { numerical: true, .. } => EXIT_NUMERICAL,
            CliError::Sweep { .. } => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "starkfloq", version, about = "Driven non-Hermitian Wannier-Stark chains and their 2D lattice analogue")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Finite-chain eigenvalues and the real ladder report.
    Spectrum(RunArgs),
    /// Site-probability trajectories (analytic static propagator or numerical integrator).
    Bloch(RunArgs),
    /// Level-spreading fronts at resonance and the fitted exponent.
    Exponent(RunArgs),
    /// Wavepackets on the 2D lattice: snapshots, traces and their analysis.
    Sim2d(RunArgs),
    /// One or two parameters swept over any other command.
    Sweep(RunArgs),
    /// List preset names.
    Presets,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config value by dot-path, e.g. `--set kappa0.im=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Start from a named preset (bloch), e.g. fig2-a1.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long, env = "STARKFLOQ_WORKERS")]
    pub workers: Option<usize>,
}

/// Parses, resolves and runs one command into `out`, writing the manifest last.
pub fn execute(command: CommandKind, value: Value, out: &Path) -> Result<Vec<OutputEntry>, CliError> {
    let started = now_rfc3339();
    let (params, mut sink, report, deferred) = match command {
        CommandKind::Spectrum => {
            let cfg: config::SpectrumConfig = from_value(&value)?;
            cfg.sizes()?;
            let mut sink = OutputSink::create(out)?;
            let report = commands::spectrum(&cfg, &mut sink)?;
            (to_json(&cfg)?, sink, report, None)
        }
        CommandKind::Bloch => {
            let mut cfg: config::BlochConfig = from_value(&value)?;
            commands::resolve_bloch(&mut cfg)?;
            let mut sink = OutputSink::create(out)?;
            let report = commands::bloch(&cfg, &mut sink)?;
            (to_json(&cfg)?, sink, report, None)
        }
        CommandKind::Exponent => {
            let cfg: config::ExponentConfig = from_value(&value)?;
            let mut sink = OutputSink::create(out)?;
            let report = commands::exponent(&cfg, &mut sink)?;
            (to_json(&cfg)?, sink, report, None)
        }
        CommandKind::Sim2d => {
            let cfg: config::Sim2dConfig = from_value(&value)?;
            cfg.preflight()?;
            let mut sink = OutputSink::create(out)?;
            let report = commands::sim2d(&cfg, &mut sink)?;
            (to_json(&cfg)?, sink, report, None)
        }
        CommandKind::Sweep => {
            let cfg: config::SweepConfig = from_value(&value)?;
            cfg.validate()?;
            let mut sink = OutputSink::create(out)?;
            let (report, deferred) = commands::sweep(&cfg, &mut sink)?;
            (to_json(&cfg)?, sink, report, deferred)
        }
    };
    sink.write_json("report.json", &report)?;
    let entries = sink.finish(command.name(), params, started)?;
    match deferred {
        Some(e) => Err(e),
        None => Ok(entries),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

fn run_args(command: CommandKind, args: &RunArgs) -> Result<Vec<OutputEntry>, CliError> {
    let value = resolve_value(command, args.preset.as_deref(), args.config.as_deref(), &args.set)?;
    execute(command, value, &args.out)
}

/// Entry point behind the binary; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let (command, args) = match &cli.command {
        Cmd::Spectrum(a) => (CommandKind::Spectrum, a),
        Cmd::Bloch(a) => (CommandKind::Bloch, a),
        Cmd::Exponent(a) => (CommandKind::Exponent, a),
        Cmd::Sim2d(a) => (CommandKind::Sim2d, a),
        Cmd::Sweep(a) => (CommandKind::Sweep, a),
        Cmd::Presets => {
            for name in config::preset_names() {
                println!("{name}");
            }
            return EXIT_OK;
        }
    };
    let workers = args.workers.unwrap_or_else(crate::par::available_workers);
    match crate::par::with_workers(workers, || run_args(command, args)) {
        Ok(entries) => {
            println!("{}: wrote {} files to {}", command.name(), entries.len() + 1, args.out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
