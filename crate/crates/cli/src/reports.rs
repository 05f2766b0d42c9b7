//! `helo accuracy` and `helo bench` — thin wrappers over the experiment
//! harness.
//!
//! `accuracy` runs encrypted update chains against the exact oracle and
//! exits 0 only when the drift thresholds hold (mean |diff| ≤ 10⁻³ and max
//! |diff| ≤ 10⁻² rating points), so CI can gate on the exit code. `bench`
//! times every operation and exits 0 whenever the run completes; timing
//! itself is never a pass/fail matter.

use crate::config::{ensure_dir, resolve};
use crate::{CliError, CommonArgs};
use clap::Args;
use helo_core::harness::{self, AccuracyConfig, BenchConfig};

/// Drift thresholds the accuracy run must meet for a zero exit.
pub const MEAN_ABS_LIMIT: f64 = 1e-3;
pub const MAX_ABS_LIMIT: f64 = 1e-2;

#[derive(Args)]
pub struct AccuracyArgs {
    /// Consecutive encrypted updates per chain
    #[arg(long, default_value_t = 1000)]
    pub updates: usize,

    /// Independent player pairs to run
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Iterations for fast operations
    #[arg(long, default_value_t = 10)]
    pub light_iters: usize,

    /// Iterations for circuit-level operations
    #[arg(long, default_value_t = 3)]
    pub heavy_iters: usize,
}

pub fn run_accuracy(common: &CommonArgs, args: &AccuracyArgs) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    if args.updates == 0 || args.pairs == 0 {
        return Err(CliError::Usage("updates and pairs must be positive".into()));
    }
    if args.pairs > 50 {
        return Err(CliError::Usage("at most 50 pairs (enrollment offsets must stay bounded)".into()));
    }
    ensure_dir(&resolved.out)?;

    // Chain enrollment spreads offsets a little above 85 per pair; widen the
    // offset bound accordingly so every pair clears enrollment validation.
    let mut protocol = resolved.protocol.clone();
    protocol.alpha_bound = protocol.alpha_bound.max(90.0 + 3.0 * args.pairs as f64).min(249.0);

    let cfg = AccuracyConfig {
        pairs: args.pairs,
        updates_per_pair: args.updates,
        seed: resolved.seed,
        ckks: resolved.ckks.clone(),
        protocol,
    };
    let report = harness::run_accuracy(&cfg, &resolved.out)
        .map_err(|e| CliError::Failure(format!("accuracy run failed: {}", e)))?;

    println!(
        "accuracy: {} updates, mean |diff| {:.4e}, max |diff| {:.4e}, stddev {:.4e}",
        report.total_updates, report.mean_abs_error, report.max_abs_error, report.std_dev_abs_error
    );
    println!(
        "accuracy: precision min {:.1} bits, mean {:.1} bits, ≥20-bit share {:.3}",
        report.precision_min_bits, report.precision_mean_bits, report.precision_share_ge_20
    );
    println!("accuracy: reports at {} and {}", report.csv_path, report.json_path);

    if report.mean_abs_error <= MEAN_ABS_LIMIT && report.max_abs_error <= MAX_ABS_LIMIT {
        println!(
            "accuracy: PASS (mean ≤ {:.0e}, max ≤ {:.0e})",
            MEAN_ABS_LIMIT, MAX_ABS_LIMIT
        );
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "accuracy thresholds breached: mean {:.4e} (limit {:.0e}), max {:.4e} (limit {:.0e})",
            report.mean_abs_error, MEAN_ABS_LIMIT, report.max_abs_error, MAX_ABS_LIMIT
        )))
    }
}

pub fn run_bench(common: &CommonArgs, args: &BenchArgs) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    if args.light_iters == 0 || args.heavy_iters == 0 {
        return Err(CliError::Usage("iteration counts must be positive".into()));
    }
    ensure_dir(&resolved.out)?;

    let cfg = BenchConfig {
        ckks: resolved.ckks.clone(),
        seed: resolved.seed,
        light_iters: args.light_iters,
        heavy_iters: args.heavy_iters,
    };
    let report = harness::run_bench(&cfg, &resolved.out)
        .map_err(|e| CliError::Failure(format!("bench run failed: {}", e)))?;

    println!("bench: parameter set {}, {:.1}s total", report.label, report.elapsed_secs);
    println!("  {:<28} {:>7} {:>12} {:>12}", "operation", "iters", "mean ms", "median ms");
    for row in &report.rows {
        println!(
            "  {:<28} {:>7} {:>12.3} {:>12.3}",
            row.op, row.iters, row.mean_ms, row.median_ms
        );
    }
    println!("  {:<28} {:>12}", "object", "bytes");
    for size in &report.sizes {
        println!("  {:<28} {:>12}", size.object, size.bytes);
    }
    println!("bench: reports at {} and {}", report.csv_path, report.json_path);
    Ok(())
}
