//! qkdlab command-line front end.
//!
//! Subcommands cover the analytic planners (`chernoff`, `ee-curve`,
//! `decoy-curve`, `compare`) and the seeded end-to-end simulation
//! (`simulate`). All randomness derives from a single master seed, so a given
//! config produces byte-identical output files on every run.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 2 config error, 3 domain error, 4 I/O error.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Domain(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "qkdlab",
    about = "BB84 photon-number-splitting attack simulator and detection planner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a symmetric Bernoulli hypothesis test: distance, threshold,
    /// trials and the error bound.
    Chernoff {
        /// Null-hypothesis success probability.
        #[arg(long)]
        p: f64,
        /// Alternative-hypothesis success probability.
        #[arg(long)]
        q: f64,
        /// Target maximum error probability, in (0, 0.5).
        #[arg(long, default_value_t = 0.01)]
        max_error: f64,
    },
    /// Write the trials-vs-dephasing curve as CSV.
    EeCurve {
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        #[arg(long, default_value_t = 0.45)]
        d_max: f64,
        #[arg(long, default_value_t = 46)]
        steps: usize,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        #[arg(long)]
        out: String,
    },
    /// Write the decoy-vs-EE pulse-budget curve over a loss grid as CSV.
    DecoyCurve(CurveArgs),
    /// Same curve as decoy-curve, plus a comparison table and crossover
    /// summary on stdout.
    Compare(CurveArgs),
    /// Run a full seeded protocol exchange described by a config file.
    Simulate {
        /// Path to the scenario config file.
        #[arg(long)]
        config: String,
        /// Output CSV path for the run summary.
        #[arg(long)]
        out: String,
        /// Optional CSV path for the per-slot outcome log.
        #[arg(long)]
        slot_log: Option<String>,
        /// Master seed override (highest precedence, above QKDLAB_SEED and
        /// the config file).
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, default_value_t = 0.05)]
    loss_min: f64,
    #[arg(long, default_value_t = 0.95)]
    loss_max: f64,
    #[arg(long, default_value_t = 19)]
    steps: usize,
    /// Mean photon number of the dimmer decoy intensity.
    #[arg(long, default_value_t = 0.1)]
    mu1: f64,
    /// Mean photon number of the brighter decoy intensity.
    #[arg(long, default_value_t = 0.5)]
    mu2: f64,
    /// Share of pulses emitted at mu1.
    #[arg(long, default_value_t = 0.7)]
    fraction1: f64,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    #[arg(long)]
    out: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Chernoff { p, q, max_error } => commands::chernoff(p, q, max_error),
        Command::EeCurve { d_min, d_max, steps, confidence, out } => {
            commands::ee_curve(d_min, d_max, steps, confidence, &out)
        }
        Command::DecoyCurve(args) => commands::decoy_curve(&args, false),
        Command::Compare(args) => commands::decoy_curve(&args, true),
        Command::Simulate { config, out, slot_log, seed } => {
            commands::simulate(&config, &out, slot_log.as_deref(), seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
