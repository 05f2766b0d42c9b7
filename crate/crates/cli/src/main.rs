//! `helo` — command-line surface over the encrypted rating stack.
//!
//! Six commands cover the deployment lifecycle:
//!
//! - `keygen`    writes the role-separated key material to disk,
//! - `simulate`  runs a full enrollment/match/attestation loop and emits
//!   standings plus a message trace,
//! - `accuracy`  runs the encrypted-versus-oracle drift experiment,
//! - `bench`     times every primitive and circuit operation,
//! - `prove`     produces a standalone rank range proof, and
//! - `verify`    checks one.
//!
//! Exit codes are scriptable: 0 on success, 1 when a verification or an
//! accuracy threshold fails, 2 for usage errors (bad flags, unreadable or
//! invalid configuration). Options resolve in the order command line over
//! `HELO_*` environment variables over the `--config` file over built-in
//! defaults.

mod config;
mod keygen;
mod proofs;
mod reports;
mod simulate;

use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

/// Error carrying the process exit code: usage problems exit 2,
/// verification and threshold failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Failure(msg) => write!(f, "{}", msg),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "helo",
    about = "Encrypted Elo ratings: keys, simulation, experiments, and rank proofs",
    version
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command; each one can also come from the
/// environment or the `--config` file.
#[derive(Args, Clone)]
pub struct CommonArgs {
    /// JSON file with default option values
    #[arg(long, global = true, env = "HELO_CONFIG")]
    config: Option<PathBuf>,

    /// RNG seed; every command is deterministic under a fixed seed
    #[arg(long, global = true, env = "HELO_SEED")]
    seed: Option<u64>,

    /// Output directory for reports and artifacts
    #[arg(long, global = true, env = "HELO_OUT")]
    out: Option<PathBuf>,

    /// Parameter tier: toy, mid, or std
    #[arg(long, global = true, env = "HELO_LABEL")]
    label: Option<String>,

    /// JSON file with an explicit parameter set (overrides --label)
    #[arg(long, global = true, env = "HELO_PARAMS")]
    params: Option<PathBuf>,

    /// JSON file with a custom rank ladder
    #[arg(long, global = true, env = "HELO_LADDER")]
    ladder: Option<PathBuf>,

    /// Matches per attestation cycle (N); at least 3
    #[arg(long, global = true, env = "HELO_MATCHES_PER_CYCLE")]
    matches_per_cycle: Option<u32>,

    /// Elo K-factor used by updates
    #[arg(long, global = true, env = "HELO_K_FACTOR")]
    k_factor: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and store the deployment key material
    Keygen,
    /// Run the full three-role protocol and write standings plus a trace
    Simulate(simulate::SimulateArgs),
    /// Encrypted-versus-oracle drift experiment; exit 0 iff thresholds hold
    Accuracy(reports::AccuracyArgs),
    /// Time primitives and circuits; write the results table
    Bench(reports::BenchArgs),
    /// Produce a rank range proof from a statement and witness
    Prove(proofs::ProveArgs),
    /// Check a proof file; prints 1 or 0 and exits accordingly
    Verify(proofs::VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen => keygen::run(&cli.common),
        Command::Simulate(args) => simulate::run(&cli.common, &args),
        Command::Accuracy(args) => reports::run_accuracy(&cli.common, &args),
        Command::Bench(args) => reports::run_bench(&cli.common, &args),
        Command::Prove(args) => proofs::run_prove(&cli.common, &args),
        Command::Verify(args) => proofs::run_verify(&cli.common, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(err.code())
        }
    }
}
