//! Command-line front end: run configurations, subcommands and artifact
//! writing, exposed as a library so that tests can drive them directly.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{FcTarget, Format, OracleKind, RunConfig, DATA_DIR_ENV};
use crate::error::{CliError, CliResult};
use crate::output::{write_artifact, Artifact};

#[derive(Debug, Parser)]
#[command(
    name = "timeorder",
    version,
    about = "Time-ordering corrections for Gaussian pair sources and frequency conversion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by the computing subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Grid half-width in units of the J1 decay length.
    #[arg(long)]
    pub span: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FcTargetArg {
    Modes,
    Coupling,
    #[value(name = "solve_eps", alias = "solve-eps")]
    SolveEps,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleArg {
    Quadrature,
    Propagator,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalised J1, J3 and K3 grids (CSV + sidecar).
    Jsa(Common),
    /// Schmidt numbers, figures of merit and time scales (JSON).
    Metrics(Common),
    /// Frequency-conversion modes, couplings or full-conversion ε.
    Fc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        target: Option<FcTargetArg>,
        /// Highest mode index, or the mode to convert.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Closed forms against the numerical oracles (JSON).
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        which: Option<OracleArg>,
        /// Comma-separated coupling values for the propagator.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Refractive and group indices, poling period and derived model (JSON).
    Dispersion(Common),
    /// Recompute the config hash (and data digest) recorded in an output.
    Verify {
        /// A JSON report, a sidecar, or a CSV file with its sidecar.
        path: PathBuf,
    },
}

/// Loads the config and applies command-line overrides.
pub fn load_config(common: &Common) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| CliError::io(&common.config, e))?;
    let mut run = RunConfig::from_json(&text)?;
    if let Some(n) = common.grid {
        run.grid.points = n;
    }
    if let Some(s) = common.span {
        run.grid.span_sigmas = s;
    }
    if let Some(o) = &common.out {
        run.output.path = Some(o.clone());
    }
    if let Some(f) = common.format {
        run.output.format = Some(match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        });
    }
    run.validate()?;
    Ok(run)
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// Runs one command; `Ok(false)` means the command completed but recorded
/// failures (oracle points).
pub fn run(cli: Cli) -> CliResult<bool> {
    let dir = data_dir();
    let dir = dir.as_deref();
    let emit = |artifact: &Artifact, run: &RunConfig| -> CliResult<()> {
        write_artifact(artifact, run.output.path.as_deref()).map(|_| ())
    };
    match cli.command {
        Command::Jsa(c) => {
            let run = load_config(&c)?;
            emit(&commands::cmd_jsa(&run, dir)?, &run)?;
        }
        Command::Metrics(c) => {
            let run = load_config(&c)?;
            emit(&commands::cmd_metrics(&run, dir)?, &run)?;
        }
        Command::Dispersion(c) => {
            let run = load_config(&c)?;
            emit(&commands::cmd_dispersion(&run, dir)?, &run)?;
        }
        Command::Fc { common, target, n } => {
            let mut run = load_config(&common)?;
            if let Some(t) = target {
                run.fc.target = match t {
                    FcTargetArg::Modes => FcTarget::Modes,
                    FcTargetArg::Coupling => FcTarget::Coupling,
                    FcTargetArg::SolveEps => FcTarget::SolveEps,
                };
            }
            if let Some(n) = n {
                run.fc.n = n;
            }
            emit(&commands::cmd_fc(&run, dir)?, &run)?;
        }
        Command::Oracle { common, which, eps } => {
            let mut run = load_config(&common)?;
            if let Some(w) = which {
                run.oracle.which = match w {
                    OracleArg::Quadrature => OracleKind::Quadrature,
                    OracleArg::Propagator => OracleKind::Propagator,
                };
            }
            if let Some(e) = eps {
                run.oracle.eps_list = e;
            }
            let (artifact, failed) = commands::cmd_oracle(&run, dir)?;
            emit(&artifact, &run)?;
            return Ok(!failed);
        }
        Command::Verify { path } => {
            let v = output::verify(Path::new(&path))?;
            println!(
                "{}",
                serde_json::json!({"verified": true, "config_hash": v.config_hash, "data_checked": v.data_checked})
            );
        }
    }
    Ok(true)
}
