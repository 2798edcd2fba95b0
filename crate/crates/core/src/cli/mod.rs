//! Command-line front end: `gen`, `run`, `bench` and `verify-estimator`.
//!
//! Settings come from an optional JSON file (`--config`) overlaid with
//! flags. Reports are JSON documents embedding the resolved settings; the
//! `timestamp` field is the only part that changes between identical runs.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 unreadable or invalid
//! data, 4 runtime failure.

pub mod bench;
pub mod commands;
pub mod config;
pub mod workloads;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::ExperimentConfig;

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "qssl",
    version,
    about = "Simulate quantum semi-supervised learners with cost accounting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Gaussian-blob dataset to CSV.
    Gen(CommandArgs),
    /// Run one learner on a dataset file or a generated dataset.
    Run(CommandArgs),
    /// Sweep a size parameter and fit cost scaling exponents.
    Bench(CommandArgs),
    /// Measure empirical coverage of the noisy estimators.
    VerifyEstimator(CommandArgs),
}

#[derive(Debug, Args)]
pub struct CommandArgs {
    /// JSON settings file (a previous report works too); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Gen,
    Run,
    Bench,
    VerifyEstimator,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("data error: {0}")]
    Data(Error),
    #[error("{0}")]
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timestamp {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Serialize)]
struct Report<'a, B: Serialize> {
    schema_version: u32,
    command: CommandKind,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: B,
    timestamp: Timestamp,
}

/// What a command produced, before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Output {
    /// Pretty JSON report, newline terminated.
    pub report: Option<String>,
    /// CSV table accompanying the report.
    pub table: Option<String>,
    /// One-line human summary for stderr.
    pub summary: String,
    pub out: Option<PathBuf>,
}

fn render<B: Serialize>(command: CommandKind, config: &ExperimentConfig, body: B, clock: (u128, Instant)) -> String {
    let report = Report {
        schema_version: config::SCHEMA_VERSION,
        command,
        config,
        body,
        timestamp: Timestamp {
            started_unix_ms: clock.0,
            elapsed_ms: clock.1.elapsed().as_millis(),
        },
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report types serialize");
    s.push('\n');
    s
}

fn csv_table<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Runtime(Error::InvalidArgument(e.to_string())))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(Error::InvalidArgument(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Resolve settings and run a command without touching stdout.
pub fn execute(command: CommandKind, settings: &ExperimentConfig) -> Result<Output, CliError> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis());
    let clock = (started, Instant::now());
    match command {
        CommandKind::Gen => {
            let plan = config::resolve_gen(settings).map_err(CliError::Config)?;
            let ds = commands::run_gen(&plan)?;
            Ok(Output {
                summary: format!(
                    "wrote {} points ({} labeled, d = {}) to {}",
                    ds.len(),
                    ds.num_labeled(),
                    ds.dim(),
                    plan.out.display()
                ),
                ..Default::default()
            })
        }
        CommandKind::Run => {
            let plan = config::resolve_run(settings).map_err(CliError::Config)?;
            let body = commands::run_run(&plan)?;
            let summary = format!("{} notes, {} ledger rows", body.notes.len(), body.ledger.len());
            Ok(Output {
                report: Some(render(command, &plan.echo, body, clock)),
                table: None,
                summary,
                out: plan.out,
            })
        }
        CommandKind::Bench => {
            let plan = config::resolve_bench(settings).map_err(CliError::Config)?;
            let result = bench::run_bench(&plan).map_err(CliError::Runtime)?;
            let table = csv_table(&result.rows)?;
            let summary = format!(
                "quantum slope {:.3}, classical slope {:.3} in {}",
                result.quantum_fit.slope, result.classical_fit.slope, result.variable
            );
            Ok(Output {
                report: Some(render(command, &plan.echo, &result, clock)),
                table: Some(table),
                summary,
                out: plan.out,
            })
        }
        CommandKind::VerifyEstimator => {
            let plan = config::resolve_verify(settings).map_err(CliError::Config)?;
            let rows = bench::run_verify(&plan).map_err(CliError::Runtime)?;
            let table = csv_table(&rows)?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            let summary = format!("{} grid points, {failed} below the coverage bound", rows.len());
            Ok(Output {
                report: Some(render(command, &plan.echo, serde_json::json!({ "rows": rows }), clock)),
                table: Some(table),
                summary,
                out: plan.out,
            })
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match cli.command {
        Command::Gen(a) => (CommandKind::Gen, a),
        Command::Run(a) => (CommandKind::Run, a),
        Command::Bench(a) => (CommandKind::Bench, a),
        Command::VerifyEstimator(a) => (CommandKind::VerifyEstimator, a),
    };
    let base = match &args.config {
        Some(path) => ExperimentConfig::from_file(path).map_err(|e| CliError::Config(vec![e]))?,
        None => ExperimentConfig::default(),
    };
    let settings = base.overlay(args.settings);
    let output = execute(kind, &settings)?;
    if let Some(report) = &output.report {
        match &output.out {
            Some(path) => {
                write_file(path, report)?;
                if let Some(table) = &output.table {
                    write_file(&path.with_extension("csv"), table)?;
                }
            }
            None => print!("{report}"),
        }
    }
    eprintln!("{}", output.summary);
    Ok(())
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
