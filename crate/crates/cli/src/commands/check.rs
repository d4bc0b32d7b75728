//! `zeno check`: the randomized invariant battery.

use clap::Args;
use zeno_core::invariants::{run_invariant_suite, MAX_CHECK_DIM};

use crate::CliError;

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Seed of the random instances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hilbert-space dimension; all of 2..=4 when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=MAX_CHECK_DIM as i64))]
    pub dim: Option<u8>,
}

/// Prints one line per check; `Ok(false)` if any failed.
pub fn run(args: &CheckArgs) -> Result<bool, CliError> {
    let dims: Vec<usize> = match args.dim {
        Some(d) => vec![d as usize],
        None => (2..=4).collect(),
    };
    let mut failed = Vec::new();
    for d in dims {
        for r in run_invariant_suite(args.seed, d)? {
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            println!(
                "{verdict} d={d} {}: residual {:.3e} (threshold {:.1e})",
                r.name, r.residual, r.threshold
            );
            if !r.passed {
                failed.push(format!("{} (d = {d})", r.name));
            }
        }
    }
    if failed.is_empty() {
        return Ok(true);
    }
    eprintln!("failed checks: {}", failed.join(", "));
    Ok(false)
}
