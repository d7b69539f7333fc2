//! Command-line front end: JSON configs in, CSV/JSON reports out.

pub mod commands;
pub mod config;
mod error;
pub mod report;
pub mod schema;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use config::{Command, Format, Overrides, RunConfig};
pub use error::{CliError, CliResult};
use report::ReportEnvelope;

#[derive(Debug, Parser)]
#[command(
    name = "igeoflow",
    version,
    about = "Information geometry of correlated Gaussian models"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the end of the tau grid.
    #[arg(long)]
    pub tau_max: Option<f64>,
    /// Sets both the absolute and relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Record wall time in the provenance block. Makes output non-reproducible.
    #[arg(long)]
    pub timing: bool,
}

/// Effective configuration: file, then flags, then the command's defaults.
pub fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let o = Overrides {
        tau_max: cli.tau_max,
        tol: cli.tol,
        out: cli.out.clone(),
        format: cli.format,
    };
    config.apply(&o, cli.command);
    config.resolve(cli.command);
    config.validate(cli.command)?;
    if cli.jobs == Some(0) {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    Ok(config)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let start = Instant::now();
    let config = load_config(cli)?;
    let format = config.output.format;
    let path = config.output.path.clone();

    if cli.command == Command::Verify {
        let results = verify::run_criteria();
        for r in &results {
            println!("{}", r.line());
        }
        let failed = results.iter().filter(|r| !r.passed).count();
        if path.is_some() {
            let mut env =
                ReportEnvelope::new(Command::Verify, config, verify::criteria_payload(&results));
            if cli.timing {
                env.provenance.wall_time_s = Some(start.elapsed().as_secs_f64());
            }
            env.emit(format, path.as_deref())?;
        }
        return match failed {
            0 => Ok(()),
            n => Err(CliError::VerificationFailed {
                failed: n,
                total: results.len(),
            }),
        };
    }

    let (payload, deferred) = match cli.command {
        Command::Sweep => sweep::sweep_payload(&config, cli.jobs)?,
        c => (commands::run_command(c, &config)?, None),
    };
    for w in &payload.warnings {
        eprintln!("warning: {w}");
    }
    let mut env = ReportEnvelope::new(cli.command, config, payload);
    if cli.timing {
        env.provenance.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    env.emit(format, path.as_deref())?;
    deferred.map_or(Ok(()), Err)
}
