//! Paths on `[-T,0]`, trajectories on `[0,T]`, and the measures that act on them.
//!
//! Everything lives on a uniform grid and is read between nodes by linear
//! interpolation. Integrals of a sampled density against a sampled path are
//! taken exactly for the two linear interpolants, which keeps derivative
//! pairings consistent with finite differences of node values.

mod io;
mod kernel;
mod measure;

pub use io::{Envelope, PathKind};
pub use kernel::{DenseKernel, Kernel2, SeparableTerm, MAX_DENSE_NODES};
pub use measure::{Atom, Density, PathMeasure};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when snapping a coordinate onto a grid node.
const SNAP_TOL: f64 = 1e-9;

/// Uniform grid with `n_steps` cells over an interval of length `horizon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Invalid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::Invalid("n_steps must be positive".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node `k` of `[-T,0]`; node 0 is `-T` and node `N` is `0`, both exactly.
    pub fn x(&self, k: usize) -> f64 {
        -self.horizon * ((self.n_steps - k) as f64 / self.n_steps as f64)
    }

    /// Node `k` of `[0,T]`.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * (k as f64 / self.n_steps as f64)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(T={}, N={}) vs (T={}, N={})",
                self.horizon, self.n_steps, other.horizon, other.n_steps
            )))
        }
    }

    /// Grid index of a time in `[0,T]`; fails unless `t` sits on a node.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let pos = t / self.step();
        let k = pos.round();
        if !(t.is_finite()) || k < 0.0 || k > self.n_steps as f64 {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        if (pos - k).abs() > SNAP_TOL * pos.abs().max(1.0) {
            return Err(Error::OffGrid { time: t, step: self.step() });
        }
        Ok(k as usize)
    }

    /// Cell and weight for linear interpolation at `x ∈ [-T,0]`: the value is
    /// `(1-w) v[k] + w v[k+1]`; nodes come back as `(k, 0.0)`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let pos = (x + self.horizon) / self.step();
        let n = self.n_steps as f64;
        let tol = SNAP_TOL * n.max(1.0);
        if !x.is_finite() || pos < -tol || pos > n + tol {
            return Err(Error::Domain(format!("x = {x} outside [-{}, 0]", self.horizon)));
        }
        let nearest = pos.round();
        if (pos - nearest).abs() <= SNAP_TOL * pos.abs().max(1.0) {
            return Ok((nearest.clamp(0.0, n) as usize, 0.0));
        }
        let k = pos.floor().clamp(0.0, n - 1.0);
        Ok((k as usize, pos - k))
    }
}

/// Exact integral over one cell of width `h` of the product of two linear
/// functions with end values `(p0, p1)` and `(q0, q1)`.
#[inline]
pub fn cell_product(h: f64, p0: f64, p1: f64, q0: f64, q1: f64) -> f64 {
    h / 6.0 * (2.0 * p0 * q0 + p0 * q1 + p1 * q0 + 2.0 * p1 * q1)
}

/// `∫ p q` over nodes `lo..=hi` for two interpolated sample vectors.
pub fn product_integral(h: f64, p: &[f64], q: &[f64], lo: usize, hi: usize) -> f64 {
    (lo..hi)
        .map(|k| cell_product(h, p[k], p[k + 1], q[k], q[k + 1]))
        .sum()
}

/// Trapezoid (exact for the interpolant) integral of samples over nodes `lo..=hi`.
pub fn linear_integral(h: f64, p: &[f64], lo: usize, hi: usize) -> f64 {
    (lo..hi).map(|k| 0.5 * h * (p[k] + p[k + 1])).sum()
}

/// Moments `∫ hat_i g` of the interpolated `g` against the hat functions of
/// nodes `lo..=hi`, restricted to `[x_lo, x_hi]`.
pub fn hat_moments(h: f64, g: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    let mut m = vec![0.0; g.len()];
    for k in lo..hi {
        m[k] += h / 6.0 * (2.0 * g[k] + g[k + 1]);
        m[k + 1] += h / 6.0 * (g[k] + 2.0 * g[k + 1]);
    }
    m
}

/// Continuous path on `[-T,0]` sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Invalid(format!(
                "expected {} samples, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n_nodes()] }
    }

    pub fn zero(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|k| f(grid.x(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// `η(0)`.
    pub fn last(&self) -> f64 {
        self.values[self.grid.n_steps()]
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (k, w) = self.grid.locate(x)?;
        if w == 0.0 {
            Ok(self.values[k])
        } else {
            Ok((1.0 - w) * self.values[k] + w * self.values[k + 1])
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫_{-T}^0 η(x) g(x) dx` for two interpolated paths.
    pub fn inner(&self, other: &SampledPath) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(product_integral(
            self.grid.step(),
            &self.values,
            &other.values,
            0,
            self.grid.n_steps(),
        ))
    }

    pub fn integral(&self) -> f64 {
        linear_integral(self.grid.step(), &self.values, 0, self.grid.n_steps())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SampledPath) -> Result<SampledPath> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(SampledPath { grid: self.grid, values })
    }

    pub fn scaled(&self, c: f64) -> SampledPath {
        SampledPath { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Empirical modulus of continuity `sup_{|i-j| ≤ lag} |v_i - v_j|`.
    pub fn modulus(&self, lag: usize) -> f64 {
        modulus(&self.values, lag)
    }
}

pub(crate) fn modulus(values: &[f64], lag: usize) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..values.len() {
        for j in i + 1..values.len().min(i + lag + 1) {
            best = best.max((values[i] - values[j]).abs());
        }
    }
    best
}

/// Real process sampled on `[0,T]`, node `k` at time `kΔ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Invalid(format!(
                "expected {} samples, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|k| f(grid.time(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (k, w) = self.grid.locate(t - self.grid.horizon())?;
        if w == 0.0 {
            Ok(self.values[k])
        } else {
            Ok((1.0 - w) * self.values[k] + w * self.values[k + 1])
        }
    }

    pub fn scaled(&self, c: f64) -> Trajectory {
        Trajectory { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Window `X_t(·)` at a grid time `t`.
    pub fn window(&self, t: f64) -> Result<SampledPath> {
        let k = self.grid.time_index(t)?;
        Ok(self.window_at(k))
    }

    /// Window at grid index `k`: `η(x) = X(t_k + x)`, constant `X(0)` where `t_k + x < 0`.
    pub fn window_at(&self, k: usize) -> SampledPath {
        let n = self.grid.n_steps();
        let values = (0..=n)
            .map(|j| if k + j >= n { self.values[k + j - n] } else { self.values[0] })
            .collect();
        SampledPath { grid: self.grid, values }
    }

    /// Keep every `factor`-th node.
    pub fn coarsen(&self, factor: usize) -> Result<Trajectory> {
        if factor == 0 || !self.grid.n_steps().is_multiple_of(factor) {
            return Err(Error::Invalid(format!(
                "cannot coarsen {} steps by {factor}",
                self.grid.n_steps()
            )));
        }
        let grid = Grid::new(self.grid.horizon(), self.grid.n_steps() / factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(Trajectory { grid, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn eval_constant_path() {
        let p = SampledPath::constant(grid(8), 1.0);
        assert_eq!(p.eval(-0.5).unwrap(), 1.0);
    }

    #[test]
    fn eval_exact_at_nodes() {
        let g = Grid::new(2.7, 37).unwrap();
        let p = SampledPath::from_fn(g, |x| x);
        for k in 0..=37 {
            assert_eq!(p.eval(g.x(k)).unwrap(), g.x(k));
        }
    }

    #[test]
    fn eval_midpoint_interpolates() {
        let p = SampledPath::new(grid(1), vec![0.0, 1.0]).unwrap();
        assert_eq!(p.eval(-0.5).unwrap(), 0.5);
    }

    #[test]
    fn eval_outside_domain_fails() {
        let p = SampledPath::zero(grid(4));
        assert!(matches!(p.eval(0.1), Err(Error::Domain(_))));
        assert!(matches!(p.eval(-1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn window_full_and_degenerate() {
        let g = grid(8);
        let traj = Trajectory::from_fn(g, |t| t * t + 1.0);
        let full = traj.window(1.0).unwrap();
        assert_eq!(full.values(), traj.values());
        let start = traj.window(0.0).unwrap();
        assert!(start.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn window_extension_rule() {
        let g = grid(8);
        let traj = Trajectory::from_fn(g, |t| t);
        let w = traj.window(0.5).unwrap();
        assert!((w.eval(-0.25).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(w.eval(-0.75).unwrap(), 0.0);
    }

    #[test]
    fn window_off_grid_fails() {
        let traj = Trajectory::from_fn(grid(8), |t| t);
        assert!(matches!(traj.window(0.3), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn window_at_zero_is_trajectory_value() {
        let g = grid(16);
        let traj = Trajectory::from_fn(g, |t| (7.0 * t).sin());
        for k in 0..=16 {
            assert_eq!(traj.window_at(k).last(), traj.value(k));
        }
    }

    #[test]
    fn product_rule_exact_for_linear_times_linear() {
        // ∫_{-1}^0 x * (1 + x) dx = -1/2 + 1/3
        let g = grid(3);
        let p = SampledPath::from_fn(g, |x| x);
        let q = SampledPath::from_fn(g, |x| 1.0 + x);
        assert!((p.inner(&q).unwrap() - (-0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn modulus_of_linear_path() {
        let p = SampledPath::from_fn(grid(10), |x| 2.0 * x);
        assert!((p.modulus(3) - 0.6).abs() < 1e-12);
    }
}
