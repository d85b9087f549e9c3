//! `startup-timing`: solve, sweep and verify entry/exit timing scenarios.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 when a solve fails,
//! 4 when a verification check fails, 1 for I/O and other errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod output;
mod scenario;

use output::Format;
use scenario::ScenarioFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{code}: {message}")]
    Validation { code: &'static str, message: String },
    #[error("{code}: {message}")]
    Solver { code: &'static str, message: String },
    #[error("E_VERIFY: {0}")]
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Solver { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "startup-timing",
    version,
    about = "Optimal entry, cancellation and abandonment thresholds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override a scenario key, e.g. `alpha=0.3` or `mc.seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct McOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one scenario and print its thresholds.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write an (x, v_tilde, v, psi) table to this file.
        #[arg(long)]
        values_out: Option<PathBuf>,
        /// Lowest price of the value table [default: c*/4].
        #[arg(long, requires = "values_out")]
        grid_min: Option<f64>,
        /// Highest price of the value table [default: 2 max(e*, a~*)].
        #[arg(long, requires = "values_out")]
        grid_max: Option<f64>,
        /// Number of log-spaced prices in the value table.
        #[arg(long, requires = "values_out", default_value_t = 200)]
        grid_n: usize,
    },
    /// Solve the scenario once per point of its `[sweep]` grid.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Check the analytic solution against Monte Carlo and ODE residuals.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: McOverrides,
    },
}

fn load(common: &Common, extra: Vec<String>) -> anyhow::Result<ScenarioFile> {
    let mut overrides = common.overrides.clone();
    overrides.extend(extra);
    ScenarioFile::load(&common.scenario, &overrides)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve {
            common,
            values_out,
            grid_min,
            grid_max,
            grid_n,
        } => {
            let scenario = load(&common, Vec::new())?;
            let grid = commands::GridSpec {
                min: grid_min,
                max: grid_max,
                n: grid_n,
            };
            let (table, values) = commands::solve(&scenario, values_out.is_some().then_some(grid));
            table.emit(common.format, common.out.as_deref())?;
            if let (Some(path), Some(values)) = (values_out, values) {
                values
                    .emit(common.format, Some(&path))
                    .with_context(|| format!("writing value table to {}", path.display()))?;
            }
            commands::row_status(&table)
        }
        Command::Sweep { common } => {
            let scenario = load(&common, Vec::new())?;
            let table = commands::sweep(&scenario)?;
            table.emit(common.format, common.out.as_deref())?;
            commands::row_status(&table)
        }
        Command::Verify { common, mc } => {
            let mut extra = Vec::new();
            if let Some(s) = mc.seed {
                extra.push(format!("mc.seed={s}"));
            }
            if let Some(n) = mc.paths {
                extra.push(format!("mc.n_paths={n}"));
            }
            if let Some(dt) = mc.dt {
                extra.push(format!("mc.dt={dt:?}"));
            }
            let scenario = load(&common, extra)?;
            let report = commands::verify(&scenario)?;
            report.table.emit(common.format, common.out.as_deref())?;
            match report.failed {
                0 => Ok(()),
                n => Err(CliError::Verification(format!(
                    "{n} of {} checks failed",
                    report.table.rows.len()
                ))
                .into()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CliError>() {
                Some(c) => ExitCode::from(c.exit_code()),
                None => ExitCode::from(1),
            }
        }
    }
}
