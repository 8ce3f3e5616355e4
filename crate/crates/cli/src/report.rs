//! `report.json` records and CSV tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Version of the `report.json` layout.
pub const SCHEMA: u32 = 1;

/// How a check's value is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// `|value| ≤ tolerance`
    AbsLe,
    /// `value ≥ tolerance`
    Ge,
    /// `|value| ≤ 3 · std_error`; `tolerance` holds the bound.
    ThreeSe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The property or oracle the value is compared against.
    pub reference: String,
    #[serde(deserialize_with = "nan_or_f64")]
    pub value: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub tolerance: f64,
    pub gate: Gate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

/// JSON has no NaN; it is written as `null` and read back as NaN.
fn nan_or_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    pub fn abs_le(name: &str, reference: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            reference: reference.into(),
            value,
            tolerance,
            gate: Gate::AbsLe,
            std_error: None,
            error: None,
            pass: value.abs() <= tolerance,
        }
    }

    pub fn at_least(name: &str, reference: &str, value: f64, bound: f64) -> Self {
        Self { gate: Gate::Ge, pass: value >= bound, ..Self::abs_le(name, reference, value, bound) }
    }

    /// Statistical gate `|value| ≤ 3 se`.
    pub fn within_3se(name: &str, reference: &str, value: f64, se: f64) -> Self {
        Self {
            gate: Gate::ThreeSe,
            std_error: Some(se),
            pass: value.abs() <= 3.0 * se,
            ..Self::abs_le(name, reference, value, 3.0 * se)
        }
    }

    /// `|value| ≤ tolerance` with a reported standard error.
    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }

    pub fn failed(name: &str, reference: &str, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            reference: reference.into(),
            value: f64::NAN,
            tolerance: f64::NAN,
            gate: Gate::AbsLe,
            std_error: None,
            error: Some(err.to_string()),
            pass: false,
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}/{}", self.name);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub seed: u64,
    pub grid_sizes: Vec<usize>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub checks: Vec<Check>,
    pub environment: Environment,
    pub pass: bool,
}

impl Report {
    pub fn new(suite: &str, seed: u64, checks: Vec<Check>, mut grid_sizes: Vec<usize>, wall_time_s: f64) -> Self {
        grid_sizes.sort_unstable();
        grid_sizes.dedup();
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self {
            schema: SCHEMA,
            suite: suite.into(),
            checks,
            environment: Environment {
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                grid_sizes,
                wall_time_s,
            },
            pass,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("report.json"), text + "\n")?;
        Ok(())
    }
}

/// A CSV table collected by a suite and written next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(dir.join(&self.file)).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shorthand for a numeric CSV cell.
pub fn cell(x: impl std::fmt::Display) -> String {
    x.to_string()
}
