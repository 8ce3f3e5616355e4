//! Explicit solution for cylindrical terminal conditions
//! `H(η) = f(∫φ₁(s+T) d⁻η(s), …, ∫φₙ(s+T) d⁻η(s))`.
//!
//! The solution is `u(t,η) = Ψ(t, y(t,η))` where `y` are the forward-integral
//! features of the window and `Ψ(t,y) = E[f(y + σZ)]`, `Z ~ N(0, Σ_t)`.

mod gaussian;
mod gram;
mod solver;

pub use gaussian::{gaussian_dp, gaussian_p, GaussianDerivs, PsiDerivs};
pub use gram::GramMatrix;
pub use solver::{CylSolver, FeatureAccumulator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::Grid;

/// Largest supported feature dimension.
pub const MAX_DIM: usize = 4;

/// Default lower bound on `det Σ_t`.
pub const DET_FLOOR: f64 = 1e-12;

/// A `C²` basis function on `[0,T]` with analytic first and second derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Basis {
    Constant { value: f64 },
    /// `Σ c_k s^k`
    Polynomial { coeffs: Vec<f64> },
    /// `scale · e^{rate s}`
    Exp { scale: f64, rate: f64 },
    /// `amp · sin(freq s + phase)`
    Sin { amp: f64, freq: f64, phase: f64 },
}

impl Basis {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Basis::Constant { value } => *value,
            Basis::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            Basis::Exp { scale, rate } => scale * (rate * s).exp(),
            Basis::Sin { amp, freq, phase } => amp * (freq * s + phase).sin(),
        }
    }

    pub fn d1(&self, s: f64) -> f64 {
        match self {
            Basis::Constant { .. } => 0.0,
            Basis::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * s + k as f64 * c),
            Basis::Exp { scale, rate } => scale * rate * (rate * s).exp(),
            Basis::Sin { amp, freq, phase } => amp * freq * (freq * s + phase).cos(),
        }
    }

    pub fn d2(&self, s: f64) -> f64 {
        match self {
            Basis::Constant { .. } => 0.0,
            Basis::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * s + (k * (k - 1)) as f64 * c),
            Basis::Exp { scale, rate } => scale * rate * rate * (rate * s).exp(),
            Basis::Sin { amp, freq, phase } => -amp * freq * freq * (freq * s + phase).sin(),
        }
    }
}

/// Outer function `f: ℝⁿ → ℝ` of a cylindrical functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// `y₁²`
    Square,
    /// `Σ c_i y_i`
    Linear { coeffs: Vec<f64> },
    /// `max(y₁ - K, 0)`
    Call { strike: f64 },
    /// `y₁² + y₂`
    Sum2,
    /// Piecewise-linear in `y₁` through `(lo + kΔ, values[k])`, constant outside.
    Tabulated { lo: f64, hi: f64, values: Vec<f64> },
}

impl Payoff {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Payoff::Square => y[0] * y[0],
            Payoff::Linear { coeffs } => coeffs.iter().zip(y).map(|(c, v)| c * v).sum(),
            Payoff::Call { strike } => (y[0] - strike).max(0.0),
            Payoff::Sum2 => y[0] * y[0] + y[1],
            Payoff::Tabulated { lo, hi, values } => {
                let m = values.len() - 1;
                let pos = ((y[0] - lo) / (hi - lo) * m as f64).clamp(0.0, m as f64);
                let k = (pos.floor() as usize).min(m.saturating_sub(1));
                let w = pos - k as f64;
                if m == 0 {
                    values[0]
                } else {
                    (1.0 - w) * values[k] + w * values[k + 1]
                }
            }
        }
    }

    /// Gradient where it exists (right derivative at kinks).
    pub fn grad(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        match self {
            Payoff::Square => g[0] = 2.0 * y[0],
            Payoff::Linear { coeffs } => g.iter_mut().zip(coeffs).for_each(|(a, c)| *a = *c),
            Payoff::Call { strike } => g[0] = if y[0] >= *strike { 1.0 } else { 0.0 },
            Payoff::Sum2 => {
                g[0] = 2.0 * y[0];
                g[1] = 1.0;
            }
            Payoff::Tabulated { lo, hi, values } => {
                let m = values.len() - 1;
                if m > 0 && y[0] >= *lo && y[0] < *hi {
                    let h = (hi - lo) / m as f64;
                    let k = (((y[0] - lo) / h).floor() as usize).min(m - 1);
                    g[0] = (values[k + 1] - values[k]) / h;
                }
            }
        }
        g
    }

    /// Hessian, row-major `n × n` (zero at kinks).
    pub fn hess(&self, n: usize) -> Vec<f64> {
        let mut h = vec![0.0; n * n];
        if matches!(self, Payoff::Square | Payoff::Sum2) {
            h[0] = 2.0;
        }
        h
    }

    pub fn min_dim(&self) -> usize {
        match self {
            Payoff::Linear { coeffs } => coeffs.len(),
            Payoff::Sum2 => 2,
            _ => 1,
        }
    }

    pub fn is_continuous(&self) -> bool {
        true
    }

    /// Locations in `y₁` where `f` is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Payoff::Call { strike } => vec![*strike],
            Payoff::Tabulated { lo, hi, values } => {
                let m = values.len().saturating_sub(1).max(1);
                (0..=m).map(|k| lo + (hi - lo) * k as f64 / m as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Exponent `p` with `|f(y)| ≤ c(1 + |y|^p)`.
    pub fn growth_exponent(&self) -> u32 {
        match self {
            Payoff::Square | Payoff::Sum2 => 2,
            Payoff::Linear { .. } | Payoff::Call { .. } => 1,
            Payoff::Tabulated { .. } => 0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < self.min_dim() {
            return Err(Error::Invalid(format!("payoff {self:?} needs at least {} features", self.min_dim())));
        }
        if let Payoff::Linear { coeffs } = self {
            if coeffs.len() != n {
                return Err(Error::Invalid(format!("linear payoff has {} coefficients for {n} features", coeffs.len())));
            }
        }
        if let Payoff::Tabulated { lo, hi, values } = self {
            if values.is_empty() || !(hi > lo) {
                return Err(Error::Invalid("tabulated payoff needs values and lo < hi".into()));
            }
        }
        Ok(())
    }
}

/// Cylindrical terminal condition on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylindricalSpec {
    pub grid: Grid,
    pub sigma: f64,
    pub basis: Vec<Basis>,
    pub payoff: Payoff,
}

impl CylindricalSpec {
    pub fn new(grid: Grid, sigma: f64, basis: Vec<Basis>, payoff: Payoff) -> Result<Self> {
        let spec = Self { grid, sigma, basis, payoff };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Invalid(format!("feature dimension must be in 1..={MAX_DIM}, got {n}")));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        self.payoff.validate(n)?;
        for (i, b) in self.basis.iter().enumerate() {
            let dev = basis_consistency(b, &self.grid);
            let h = self.grid.step();
            let bound = h * (1.0 + (0..=self.grid.n_steps()).map(|k| b.d2(self.grid.time(k)).abs()).fold(0.0, f64::max));
            if !(dev <= bound) {
                return Err(Error::Invalid(format!(
                    "basis {i}: difference quotients deviate from the derivative by {dev:e} (> {bound:e})"
                )));
            }
        }
        Ok(())
    }

    /// Largest observed ratio `|f(y)| / (1 + |y|^p)` over `probes`.
    pub fn growth_ratio(&self, probes: &[Vec<f64>]) -> f64 {
        let p = self.payoff.growth_exponent() as i32;
        probes
            .iter()
            .map(|y| {
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                self.payoff.eval(y).abs() / (1.0 + norm.powi(p))
            })
            .fold(0.0, f64::max)
    }
}

/// `max_k |Δφ/Δ - (φ̇_k + φ̇_{k+1})/2|` over the grid.
pub fn basis_consistency(b: &Basis, grid: &Grid) -> f64 {
    let h = grid.step();
    (0..grid.n_steps())
        .map(|k| {
            let (s0, s1) = (grid.time(k), grid.time(k + 1));
            ((b.value(s1) - b.value(s0)) / h - 0.5 * (b.d1(s0) + b.d1(s1))).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_derivatives_match_difference_quotients() {
        let h = 1e-5;
        let cases = [
            Basis::Polynomial { coeffs: vec![0.5, -1.0, 2.0, 0.25] },
            Basis::Exp { scale: 1.5, rate: -0.7 },
            Basis::Sin { amp: 2.0, freq: 3.0, phase: 0.1 },
        ];
        for b in &cases {
            for s in [0.1, 0.5, 0.9] {
                let d1 = (b.value(s + h) - b.value(s - h)) / (2.0 * h);
                let d2 = (b.d1(s + h) - b.d1(s - h)) / (2.0 * h);
                assert!((d1 - b.d1(s)).abs() < 1e-8, "{b:?}");
                assert!((d2 - b.d2(s)).abs() < 1e-7, "{b:?}");
            }
        }
    }

    #[test]
    fn payoff_values() {
        assert_eq!(Payoff::Square.eval(&[3.0]), 9.0);
        assert_eq!(Payoff::Call { strike: 1.0 }.eval(&[0.5]), 0.0);
        assert_eq!(Payoff::Sum2.eval(&[2.0, -1.0]), 3.0);
        let tab = Payoff::Tabulated { lo: 0.0, hi: 2.0, values: vec![0.0, 1.0, 4.0] };
        assert_eq!(tab.eval(&[1.5]), 2.5);
        assert_eq!(tab.eval(&[7.0]), 4.0);
    }

    #[test]
    fn spec_validation() {
        let g = Grid::new(1.0, 100).unwrap();
        assert!(CylindricalSpec::new(g, 1.0, vec![], Payoff::Square).is_err());
        assert!(CylindricalSpec::new(g, 1.0, vec![Basis::Constant { value: 1.0 }], Payoff::Sum2).is_err());
        assert!(CylindricalSpec::new(g, -1.0, vec![Basis::Constant { value: 1.0 }], Payoff::Square).is_err());
        assert!(CylindricalSpec::new(g, 1.0, vec![Basis::Constant { value: 1.0 }; 5], Payoff::Square).is_err());
        assert!(CylindricalSpec::new(g, 1.0, vec![Basis::Constant { value: 1.0 }], Payoff::Square).is_ok());
    }

    #[test]
    fn square_payoff_is_not_of_linear_growth() {
        let g = Grid::new(1.0, 10).unwrap();
        let spec = CylindricalSpec::new(g, 1.0, vec![Basis::Constant { value: 1.0 }], Payoff::Square).unwrap();
        assert_eq!(spec.payoff.growth_exponent(), 2);
        assert!(spec.growth_ratio(&[vec![10.0], vec![-3.0]]) <= 1.0);
    }
}
