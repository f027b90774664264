//! Batch runner behind the `landis-lab` binary.
//!
//! Every subcommand reads a TOML config, applies `key=value` overrides,
//! validates before doing any work and writes CSV tables plus a JSON summary.

pub mod commands;
pub mod config;
pub mod report;

use clap::{Args, Parser, Subcommand};
use config::ConfigError;
use report::Report;
use serde::de::DeserializeOwned;
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "landis-lab", version, about = "Lattice heat and Schrodinger audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed for every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "landis-out")]
    pub out: PathBuf,
    /// `key=value` overrides; dotted keys reach nested tables.
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inequality and Wronskian audit of the Bessel kernels.
    BesselAudit(Common),
    /// Heat solves with kernel, energy and Caccioppoli audits.
    HeatRun(Common),
    /// Commutator grids, the Lambda bound and log-convexity.
    ConvexityAudit(Common),
    /// Parabolic or elliptic Carleman constants and commutator pieces.
    CarlemanAudit(Common),
    /// Upper and lower bound sweeps with exponent fits.
    BoundsSweep(Common),
    /// Shell recursion and vanishing thresholds.
    UcCheck(Common),
    /// Convergence of the rescaled kernel to its Gaussian limit.
    GaussianLimit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
}

enum Failure {
    Config(ConfigError),
    Internal(anyhow::Error),
}

fn prepare<T: DeserializeOwned>(
    c: &Common,
    extra: Vec<String>,
    validate: impl Fn(&T) -> Result<(), ConfigError>,
) -> Result<T, Failure> {
    let mut overrides = c.overrides.clone();
    overrides.extend(extra);
    let cfg: T = config::load(c.config.as_deref(), &overrides, c.seed).map_err(Failure::Config)?;
    validate(&cfg).map_err(Failure::Config)?;
    Ok(cfg)
}

fn execute(cmd: &Command) -> Result<(Report, &Common), Failure> {
    let internal = Failure::Internal;
    Ok(match cmd {
        Command::BesselAudit(c) => {
            let cfg = prepare(c, vec![], config::BesselConfig::validate)?;
            (commands::bessel_audit(&cfg).map_err(internal)?, c)
        }
        Command::HeatRun(c) => {
            let cfg = prepare(c, vec![], config::HeatConfig::validate)?;
            (commands::heat_run(&cfg).map_err(internal)?, c)
        }
        Command::ConvexityAudit(c) => {
            let cfg = prepare(c, vec![], config::ConvexityConfig::validate)?;
            (commands::convexity_audit(&cfg).map_err(internal)?, c)
        }
        Command::CarlemanAudit(c) => {
            let cfg = prepare(c, vec![], config::CarlemanAuditConfig::validate)?;
            (commands::carleman_audit(&cfg).map_err(internal)?, c)
        }
        Command::BoundsSweep(c) => {
            let cfg = prepare(c, vec![], config::BoundsConfig::validate)?;
            (commands::bounds_sweep(&cfg).map_err(internal)?, c)
        }
        Command::UcCheck(c) => {
            let cfg = prepare(c, vec![], config::UcConfig::validate)?;
            (commands::uc_check(&cfg).map_err(internal)?, c)
        }
        Command::GaussianLimit { common, x, t } => {
            let mut extra = vec![];
            if let Some(x) = x {
                extra.push(format!("x={x:?}"));
            }
            if let Some(t) = t {
                extra.push(format!("t={t:?}"));
            }
            let cfg = prepare(common, extra, config::GaussianConfig::validate)?;
            (commands::gaussian(&cfg).map_err(internal)?, common)
        }
    })
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            EXIT_INTERNAL
        }
        Ok((rep, common)) => {
            if let Err(e) = rep.write(&common.out) {
                eprintln!("internal error: cannot write reports: {e}");
                return EXIT_INTERNAL;
            }
            for c in &rep.contracts {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if rep.passed() {
                EXIT_PASS
            } else {
                EXIT_CONTRACT
            }
        }
    }
}
