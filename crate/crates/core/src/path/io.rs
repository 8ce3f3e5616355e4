//! Columnar CSV `(x, value)` plus a small JSON envelope.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every sample bit for bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Atom, Density, Grid, PathMeasure, SampledPath, Trajectory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Path,
    Trajectory,
    Measure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub kind: PathKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom0: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_start: Option<usize>,
}

impl Envelope {
    fn plain(grid: Grid, kind: PathKind) -> Self {
        Self {
            horizon: grid.horizon(),
            n_steps: grid.n_steps(),
            kind,
            atom0: None,
            atoms: Vec::new(),
            density_start: None,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.horizon, self.n_steps)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn write_columns(xs: impl Iterator<Item = f64>, values: &[f64]) -> String {
    let mut out = String::from("x,value\n");
    for (x, v) in xs.zip(values) {
        let _ = writeln!(out, "{x},{v}");
    }
    out
}

fn read_columns(csv: &str, expected: usize) -> Result<Vec<f64>> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "x,value" => {}
        other => return Err(Error::Parse(format!("expected header `x,value`, got {other:?}"))),
    }
    let mut values = Vec::with_capacity(expected);
    for (i, line) in lines.enumerate() {
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: missing comma", i + 2)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::Parse(format!("expected {expected} rows, got {}", values.len())));
    }
    Ok(values)
}

impl SampledPath {
    pub fn to_csv(&self) -> (Envelope, String) {
        let g = self.grid();
        let xs = (0..g.n_nodes()).map(move |k| g.x(k));
        (Envelope::plain(g, PathKind::Path), write_columns(xs, self.values()))
    }

    pub fn from_csv(envelope: &Envelope, csv: &str) -> Result<Self> {
        if envelope.kind != PathKind::Path {
            return Err(Error::Parse(format!("envelope kind {:?} is not a path", envelope.kind)));
        }
        let g = envelope.grid()?;
        SampledPath::new(g, read_columns(csv, g.n_nodes())?)
    }
}

impl Trajectory {
    pub fn to_csv(&self) -> (Envelope, String) {
        let g = self.grid();
        let ts = (0..g.n_nodes()).map(move |k| g.time(k));
        (Envelope::plain(g, PathKind::Trajectory), write_columns(ts, self.values()))
    }

    pub fn from_csv(envelope: &Envelope, csv: &str) -> Result<Self> {
        if envelope.kind != PathKind::Trajectory {
            return Err(Error::Parse(format!("envelope kind {:?} is not a trajectory", envelope.kind)));
        }
        let g = envelope.grid()?;
        Trajectory::new(g, read_columns(csv, g.n_nodes())?)
    }
}

impl PathMeasure {
    /// Atoms go into the envelope, the density (zeros if absent) into the CSV.
    pub fn to_csv(&self) -> (Envelope, String) {
        let g = self.grid();
        let mut env = Envelope::plain(g, PathKind::Measure);
        env.atom0 = Some(self.atom0());
        env.atoms = self.atoms().to_vec();
        let zeros = vec![0.0; g.n_nodes()];
        let values = match self.density() {
            Some(d) => {
                env.density_start = Some(d.start());
                d.values()
            }
            None => &zeros,
        };
        let xs = (0..g.n_nodes()).map(move |k| g.x(k));
        (env, write_columns(xs, values))
    }

    pub fn from_csv(envelope: &Envelope, csv: &str) -> Result<Self> {
        if envelope.kind != PathKind::Measure {
            return Err(Error::Parse(format!("envelope kind {:?} is not a measure", envelope.kind)));
        }
        let g = envelope.grid()?;
        let values = read_columns(csv, g.n_nodes())?;
        let density = match envelope.density_start {
            Some(start) => Some(Density::new(g, start, values)?),
            None => None,
        };
        PathMeasure::new(g, envelope.atom0.unwrap_or(0.0), envelope.atoms.clone(), density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn path_round_trip_is_bit_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 2..40)) {
            let g = Grid::new(1.3, values.len() - 1).unwrap();
            let p = SampledPath::new(g, values).unwrap();
            let (env, csv) = p.to_csv();
            let env = Envelope::from_json(&env.to_json().unwrap()).unwrap();
            let back = SampledPath::from_csv(&env, &csv).unwrap();
            for (a, b) in p.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn measure_round_trip() {
        let g = Grid::new(2.0, 8).unwrap();
        let d = Density::new(g, 3, (0..9).map(|k| 0.1 * k as f64 + 1e-17).collect()).unwrap();
        let mu = PathMeasure::new(g, 0.3, vec![Atom { x: -1.25, weight: -2.0 / 3.0 }], Some(d)).unwrap();
        let (env, csv) = mu.to_csv();
        let env = Envelope::from_json(&env.to_json().unwrap()).unwrap();
        assert_eq!(PathMeasure::from_csv(&env, &csv).unwrap(), mu);
    }

    #[test]
    fn wrong_kind_and_row_count_are_rejected() {
        let g = Grid::new(1.0, 4).unwrap();
        let (env, csv) = SampledPath::zero(g).to_csv();
        assert!(Trajectory::from_csv(&env, &csv).is_err());
        let short: String = csv.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(SampledPath::from_csv(&env, &short).is_err());
    }
}
