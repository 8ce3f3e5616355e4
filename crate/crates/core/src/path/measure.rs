use serde::{Deserialize, Serialize};

use super::{linear_integral, product_integral, Grid, SampledPath};
use crate::error::{Error, Result};

/// Sampled density on `[x_start, 0]`, zero to the left of `x_start`.
///
/// `derivative` optionally carries analytic samples of the density's
/// derivative, used for Stieltjes integrals against `dμ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: Grid,
    start: usize,
    values: Vec<f64>,
    derivative: Option<Vec<f64>>,
}

impl Density {
    pub fn new(grid: Grid, start: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Invalid(format!(
                "density needs {} samples, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        if start > grid.n_steps() {
            return Err(Error::Invalid(format!("density start {start} beyond grid")));
        }
        values[..start].iter_mut().for_each(|v| *v = 0.0);
        Ok(Self { grid, start, values, derivative: None })
    }

    pub fn from_path(path: &SampledPath) -> Self {
        Self { grid: path.grid(), start: 0, values: path.values().to_vec(), derivative: None }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, start: 0, values: vec![c; grid.n_nodes()], derivative: Some(vec![0.0; grid.n_nodes()]) }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_path(&SampledPath::from_fn(grid, f))
    }

    pub fn with_derivative(mut self, mut derivative: Vec<f64>) -> Result<Self> {
        if derivative.len() != self.grid.n_nodes() {
            return Err(Error::Invalid("derivative sample count mismatch".into()));
        }
        derivative[..self.start].iter_mut().for_each(|v| *v = 0.0);
        self.derivative = Some(derivative);
        Ok(self)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative(&self) -> Option<&[f64]> {
        self.derivative.as_deref()
    }

    /// Density value at `x`, zero left of the support, linear inside it.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (k, w) = self.grid.locate(x)?;
        if k < self.start {
            return Ok(0.0);
        }
        if w == 0.0 {
            Ok(self.values[k])
        } else {
            Ok((1.0 - w) * self.values[k] + w * self.values[k + 1])
        }
    }

    /// Value on the support, extended by continuity (right limit at the support start).
    pub fn eval_on_support(&self, x: f64) -> Result<f64> {
        let (k, w) = self.grid.locate(x)?;
        let k = k.max(self.start);
        if w == 0.0 || k == self.grid.n_steps() {
            Ok(self.values[k])
        } else {
            Ok((1.0 - w) * self.values[k] + w * self.values[k + 1])
        }
    }

    /// `∫ density · g` over the support.
    pub fn pair(&self, g: &SampledPath) -> Result<f64> {
        self.grid.check_same(&g.grid())?;
        Ok(product_integral(self.grid.step(), &self.values, g.values(), self.start, self.grid.n_steps()))
    }

    pub fn integral(&self) -> f64 {
        linear_integral(self.grid.step(), &self.values, self.start, self.grid.n_steps())
    }

    /// Integral over the nodes `lo..=N` intersected with the support.
    pub fn integral_from(&self, lo: usize) -> f64 {
        linear_integral(self.grid.step(), &self.values, lo.max(self.start), self.grid.n_steps())
    }

    pub fn abs_integral(&self) -> f64 {
        let h = self.grid.step();
        (self.start..self.grid.n_steps())
            .map(|k| {
                let (a, b) = (self.values[k], self.values[k + 1]);
                if a * b >= 0.0 {
                    0.5 * h * (a.abs() + b.abs())
                } else {
                    0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
                }
            })
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Density {
        Density {
            grid: self.grid,
            start: self.start,
            values: self.values.iter().map(|v| c * v).collect(),
            derivative: self.derivative.as_ref().map(|d| d.iter().map(|v| c * v).collect()),
        }
    }

    /// `self += w * other`; the support grows to the union.
    pub fn add_scaled(&mut self, other: &Density, w: f64) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        self.start = self.start.min(other.start);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += w * b;
        }
        self.derivative = match (self.derivative.take(), &other.derivative) {
            (Some(mut d), Some(e)) => {
                d.iter_mut().zip(e).for_each(|(a, b)| *a += w * b);
                Some(d)
            }
            _ => None,
        };
        Ok(())
    }

    /// Restrict a density in `ρ` to `ρ ∈ [-T, t-T]` and move it to `x = ρ + T - t ∈ [-t, 0]`.
    /// `k` is the grid index of `t`. Returns `None` when nothing is left.
    pub fn shift_to_window(&self, k: usize) -> Option<Density> {
        let n = self.grid.n_steps();
        if self.start > k {
            return None;
        }
        let offset = n - k;
        let mut values = vec![0.0; n + 1];
        values[self.start + offset..=n].copy_from_slice(&self.values[self.start..=k]);
        let derivative = self.derivative.as_ref().map(|d| {
            let mut out = vec![0.0; n + 1];
            out[self.start + offset..=n].copy_from_slice(&d[self.start..=k]);
            out
        });
        Some(Density { grid: self.grid, start: self.start + offset, values, derivative })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Discrete total variation of the samples on the support.
    pub fn total_variation(&self) -> f64 {
        self.values[self.start..].windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub weight: f64,
}

/// Finite signed measure on `[-T,0]`: `atom0 δ₀ + Σ w_i δ_{x_i} + density dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMeasure {
    grid: Grid,
    atom0: f64,
    atoms: Vec<Atom>,
    density: Option<Density>,
}

impl PathMeasure {
    pub fn new(grid: Grid, atom0: f64, atoms: Vec<Atom>, density: Option<Density>) -> Result<Self> {
        let horizon = grid.horizon();
        for a in &atoms {
            if !(a.x >= -horizon && a.x < 0.0) {
                return Err(Error::Domain(format!("atom at {} outside [-{horizon}, 0)", a.x)));
            }
        }
        if let Some(d) = &density {
            grid.check_same(&d.grid())?;
        }
        Ok(Self { grid, atom0, atoms, density })
    }

    pub fn zero(grid: Grid) -> Self {
        Self { grid, atom0: 0.0, atoms: Vec::new(), density: None }
    }

    pub fn dirac0(grid: Grid, weight: f64) -> Self {
        Self { grid, atom0: weight, atoms: Vec::new(), density: None }
    }

    pub fn absolutely_continuous(density: Density) -> Self {
        Self { grid: density.grid(), atom0: 0.0, atoms: Vec::new(), density: Some(density) }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn atom0(&self) -> f64 {
        self.atom0
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    /// True when the measure has no atoms (so `D^⊥` is the density).
    pub fn is_absolutely_continuous(&self) -> bool {
        self.atom0 == 0.0 && self.atoms.iter().all(|a| a.weight == 0.0)
    }

    /// `⟨μ, g⟩ = atom0 g(0) + Σ w_i g(x_i) + ∫ density g`.
    pub fn pair(&self, g: &SampledPath) -> Result<f64> {
        self.grid.check_same(&g.grid())?;
        let mut acc = self.atom0 * g.last();
        for a in &self.atoms {
            acc += a.weight * g.eval(a.x)?;
        }
        if let Some(d) = &self.density {
            acc += d.pair(g)?;
        }
        Ok(acc)
    }

    pub fn total_variation(&self) -> f64 {
        self.atom0.abs()
            + self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>()
            + self.density.as_ref().map_or(0.0, Density::abs_integral)
    }

    /// Transport a measure in `ρ` through the derivative of the functional
    /// flow `η ↦ Y_T^{t,η}`: mass on `[-T, t-T)` moves to `[-t, 0)` and
    /// mass on `[t-T, 0]` collapses onto `δ₀`. `k` is the grid index of `t`.
    pub fn pullback_flow(&self, k: usize) -> PathMeasure {
        let cut = self.grid.x(k);
        let shift = self.grid.horizon() - self.grid.time(k);
        let mut atom0 = self.atom0;
        let mut atoms = Vec::new();
        for a in &self.atoms {
            if a.x < cut {
                atoms.push(Atom { x: a.x + shift, weight: a.weight });
            } else {
                atom0 += a.weight;
            }
        }
        let density = self.density.as_ref().and_then(|d| {
            atom0 += d.integral_from(k);
            d.shift_to_window(k)
        });
        PathMeasure { grid: self.grid, atom0, atoms, density }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1.0, 10).unwrap()
    }

    #[test]
    fn dirac_pairing() {
        let g = SampledPath::from_fn(grid(), |x| (3.0 * x).cos() + 2.0);
        assert_eq!(PathMeasure::dirac0(grid(), 1.0).pair(&g).unwrap(), g.last());
    }

    #[test]
    fn lebesgue_mass() {
        let mu = PathMeasure::absolutely_continuous(Density::constant(grid(), 1.0));
        let one = SampledPath::constant(grid(), 1.0);
        assert!((mu.pair(&one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dipole_pairing() {
        let mu = PathMeasure::new(grid(), 1.0, vec![Atom { x: -0.5, weight: -1.0 }], None).unwrap();
        let id = SampledPath::from_fn(grid(), |x| x);
        assert!((mu.pair(&id).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn horizon_mismatch_is_an_error() {
        let mu = PathMeasure::dirac0(grid(), 1.0);
        let g = SampledPath::zero(Grid::new(2.0, 10).unwrap());
        assert!(matches!(mu.pair(&g), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn atoms_must_avoid_zero() {
        assert!(PathMeasure::new(grid(), 0.0, vec![Atom { x: 0.0, weight: 1.0 }], None).is_err());
    }

    #[test]
    fn support_restricted_pairing() {
        let d = Density::new(grid(), 5, vec![1.0; 11]).unwrap();
        let one = SampledPath::constant(grid(), 1.0);
        assert!((d.pair(&one).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(d.eval(-0.7).unwrap(), 0.0);
        assert_eq!(d.eval_on_support(-0.7).unwrap(), 1.0);
    }

    #[test]
    fn pullback_of_constant_density() {
        // ρ-density ≡ 1 on [-1,0], t = 0.3: x-density ≡ 1 on [-0.3,0], δ₀ mass 0.7.
        let mu = PathMeasure::absolutely_continuous(Density::constant(grid(), 1.0));
        let pb = mu.pullback_flow(3);
        assert!((pb.atom0() - 0.7).abs() < 1e-14);
        let d = pb.density().unwrap();
        assert_eq!(d.start(), 7);
        assert!((d.integral() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn total_variation_counts_sign_changes() {
        let d = Density::from_fn(grid(), |x| x + 0.5);
        assert!((d.abs_integral() - 0.25).abs() < 1e-14);
    }
}
