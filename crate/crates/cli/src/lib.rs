//! Scenario runner for the pathheat check suites.
//!
//! A run parses a JSON scenario for one suite, executes the checks, and writes
//! `report.json` plus CSV tables into the output directory.

pub mod config;
pub mod error;
pub mod report;
pub mod suites;

use std::fs;
use std::path::Path;
use std::time::Instant;

pub use config::{Params, Suite};
pub use error::CliError;
pub use report::{Check, Report};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "PATHHEAT_SEED";

/// Execute `params` and write the report and tables into `out`.
pub fn run(suite: Suite, params: &Params, seed: u64, base: &Path, out: &Path) -> Result<Report, CliError> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let outcome = suites::run_suite(params, seed, base);
    let wall = start.elapsed().as_secs_f64();
    for t in &outcome.tables {
        t.write(out)?;
    }
    for (file, text) in &outcome.documents {
        fs::write(out.join(file), format!("{text}\n"))?;
    }
    let report = Report::new(suite.name(), seed, outcome.checks, outcome.grid_sizes, wall);
    report.write(out)?;
    Ok(report)
}

/// Resolve the effective seed: the environment variable wins over the flag.
pub fn effective_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
    match env {
        Some(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("{SEED_ENV}={v:?}: {e}"))),
        _ => Ok(flag.unwrap_or(0)),
    }
}
