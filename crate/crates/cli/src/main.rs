//! `wedge-credit`: price counterparty-risky CDS and first-to-default swaps
//! from a scenario file, dump the joint default densities, or check the
//! closed forms against Monte Carlo.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 Monte Carlo
//! validation flagged a discrepancy. The worker thread count is read from
//! `WEDGE_CREDIT_THREADS` (default: all cores).

mod commands;
mod report;
mod scenario;

use std::io::Write;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use report::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("validation flagged {0} check(s)")]
    Flagged(u64),
}

impl From<wedge_credit::Error> for CliError {
    fn from(e: wedge_credit::Error) -> Self {
        use wedge_credit::Error::*;
        match e {
            Domain(_) | DegenerateContract(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Flagged(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wedge-credit", version, about = "Two-name structural credit pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Monte Carlo seed, overriding the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative quadrature tolerance, overriding the scenario.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Legs, fair value and par spread of the [cds] contract.
    PriceCds(Common),
    /// Default leg and fair spread of the [ftd] contract.
    PriceFtd(Common),
    /// Hitting and survival densities on a grid, as CSV (or JSON lines).
    Density {
        #[command(flatten)]
        common: Common,
        /// Times as start:end:count.
        #[arg(long, default_value = "0.5:5:10")]
        t_grid: String,
        /// Boundary coordinates (and survival radii) as start:end:count.
        #[arg(long, default_value = "0.5:12:10")]
        coord_grid: String,
    },
    /// Closed forms against Monte Carlo, with z-scores.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_wedge_angle: Option<f64>,
    },
}

fn load(common: &Common) -> Result<scenario::ScenarioFile, CliError> {
    let mut sf = scenario::load(&common.scenario)?;
    if let Some(seed) = common.seed {
        sf.mc.seed = seed;
    }
    if let Some(tol) = common.tol {
        sf.pricing.quad.rel_tol = tol;
        sf.pricing.validate()?;
    }
    Ok(sf)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::PriceCds(c) => Ok(commands::price_cds(&load(&c)?)?.render(c.format, now())),
        Command::PriceFtd(c) => Ok(commands::price_ftd(&load(&c)?)?.render(c.format, now())),
        Command::Density {
            common,
            t_grid,
            coord_grid,
        } => {
            let sf = load(&common)?;
            let ts = commands::parse_grid(&t_grid)?;
            let xs = commands::parse_grid(&coord_grid)?;
            commands::density(&sf, &ts, &xs, common.format)
        }
        Command::Validate {
            common,
            corrupt_wedge_angle,
        } => {
            let sf = load(&common)?;
            let (report, flagged) = commands::validate(&sf, corrupt_wedge_angle)?;
            let out = report.render(common.format, now());
            if flagged > 0 {
                print!("{out}");
                let _ = std::io::stdout().flush();
                return Err(CliError::Flagged(flagged));
            }
            Ok(out)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("WEDGE_CREDIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        CliError::Invalid(format!(
            "WEDGE_CREDIT_THREADS must be a positive integer, got '{value}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
