//! `hetnet`: availability, region, coverage and rate tables for energy-harvesting
//! cellular networks, plus Monte Carlo cross-checks.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

/// Exit status for a feasibility failure under `--strict`.
const EXIT_INFEASIBLE: u8 = 2;
/// Exit status when a validation check fails.
const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "hetnet", version, about = "Energy-harvesting HetNet availability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Base seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent Monte Carlo replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Fixed-point tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the SIR target (dB).
    #[arg(long, allow_negative_numbers = true)]
    sir_target_db: Option<f64>,
    /// Override every tier's shadowing standard deviation (dB).
    #[arg(long)]
    shadow_std_db: Option<f64>,
    /// Run tier `i` (1-based) with the full-charge policy; repeatable. Accepts `k=<i>` or `<i>`.
    #[arg(long = "policy2", value_name = "k=<i>", value_parser = parse_tier)]
    policy2: Vec<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the availability fixed point.
    Availability {
        #[command(flatten)]
        common: Common,
        /// Exit with status 2 when the scenario is infeasible.
        #[arg(long)]
        strict: bool,
    },
    /// Boundary curves of the two-tier availability region.
    Region {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis.
        #[arg(long, default_value_t = hetnet_core::region::DEFAULT_GRID)]
        grid: usize,
        /// Also emit the region with tier `i` restricted to the full-charge policy; repeatable.
        #[arg(long, value_name = "k=<i>", value_parser = parse_tier)]
        constrain: Vec<usize>,
    },
    /// SIR coverage probability.
    Coverage {
        #[command(flatten)]
        common: Common,
    },
    /// Rate CCDF at one threshold, over a threshold list, or over the file's sweep.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rate thresholds (bits/s/Hz).
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
    },
    /// Spatial Monte Carlo estimates next to their analytic counterparts.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Rate threshold for the rate estimate; skipped when absent from both flag and file.
        #[arg(long)]
        rate_target: Option<f64>,
    },
    /// Run every analytic-versus-oracle check; exit status 3 on any failure.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_tier(s: &str) -> Result<usize, String> {
    let digits = s.strip_prefix("k=").unwrap_or(s);
    match digits.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i - 1),
        _ => Err(format!("expected a 1-based tier index like `k=2`, got `{s}`")),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("HETNET_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("HETNET_THREADS must be a positive integer, got `{value}`"))?;
    if threads == 0 {
        bail!("HETNET_THREADS must be a positive integer, got `{value}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Availability { common, strict } => {
            let feasible = commands::availability(&common, &mut out)?;
            Ok(if strict && !feasible { EXIT_INFEASIBLE } else { 0 })
        }
        Command::Region { common, grid, constrain } => {
            commands::region(&common, grid, &constrain, &mut out)?;
            Ok(0)
        }
        Command::Coverage { common } => {
            commands::coverage(&common, &mut out)?;
            Ok(0)
        }
        Command::Rate { common, thresholds } => {
            commands::rate(&common, &thresholds, &mut out)?;
            Ok(0)
        }
        Command::Simulate { common, rate_target } => {
            commands::simulate(&common, rate_target, &mut out)?;
            Ok(0)
        }
        Command::Validate { common } => {
            let passed = commands::validate(&common, &mut out)?;
            Ok(if passed { 0 } else { EXIT_VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(u8::from(usage));
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
