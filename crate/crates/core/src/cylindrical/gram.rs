use nalgebra::DMatrix;

use super::{CylindricalSpec, DET_FLOOR};
use crate::error::{Error, Result};

/// `Σ_t = ∫_t^T φφᵀ ds` with its Cholesky factor and inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub t: f64,
    pub sigma: DMatrix<f64>,
    /// Lower Cholesky factor `L`, `Σ = LLᵀ`.
    pub chol: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// `L⁻ᵀ`, maps whitened coordinates to `Σ⁻¹z`.
    pub chol_inv_t: DMatrix<f64>,
    pub logdet: f64,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn det(&self) -> f64 {
        self.logdet.exp()
    }
}

/// Raw `Σ` at grid index `k`: trapezoid rule on the time grid with the
/// Euler–Maclaurin end correction `-Δ²/12 [g'(T) - g'(t)]`, `g = φ_iφ_j`.
pub fn gram_entries(spec: &CylindricalSpec, k: usize) -> DMatrix<f64> {
    let grid = spec.grid;
    let n = spec.dim();
    let h = grid.step();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (bi, bj) = (&spec.basis[i], &spec.basis[j]);
            let g = |s: f64| bi.value(s) * bj.value(s);
            let dg = |s: f64| bi.d1(s) * bj.value(s) + bi.value(s) * bj.d1(s);
            let mut acc = 0.0;
            for m in k..grid.n_steps() {
                acc += 0.5 * h * (g(grid.time(m)) + g(grid.time(m + 1)));
            }
            if k < grid.n_steps() {
                acc -= h * h / 12.0 * (dg(grid.horizon()) - dg(grid.time(k)));
            }
            m[(i, j)] = acc;
            m[(j, i)] = acc;
        }
    }
    m
}

pub fn gram(spec: &CylindricalSpec, k: usize) -> Result<GramMatrix> {
    let t = spec.grid.time(k);
    let sigma = gram_entries(spec, k);
    let chol = match sigma.clone().cholesky() {
        Some(c) => c,
        None => {
            let det = sigma.determinant();
            return Err(Error::SingularGram { t, det });
        }
    };
    let l = chol.l();
    let logdet = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !(logdet.exp() > DET_FLOOR) {
        return Err(Error::SingularGram { t, det: logdet.exp() });
    }
    let inverse = chol.inverse();
    let chol_inv_t = l
        .clone()
        .try_inverse()
        .ok_or(Error::SingularGram { t, det: logdet.exp() })?
        .transpose();
    Ok(GramMatrix { t, sigma, chol: l, inverse, chol_inv_t, logdet })
}

#[cfg(test)]
mod tests {
    use super::super::{Basis, Payoff};
    use super::*;
    use crate::path::Grid;

    fn spec(basis: Vec<Basis>) -> CylindricalSpec {
        CylindricalSpec::new(Grid::new(1.0, 100).unwrap(), 1.0, basis, Payoff::Square).unwrap()
    }

    #[test]
    fn constant_basis() {
        let g = gram(&spec(vec![Basis::Constant { value: 1.0 }]), 25).unwrap();
        assert!((g.sigma[(0, 0)] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn monomial_basis() {
        let s = spec(vec![Basis::Constant { value: 1.0 }, Basis::Polynomial { coeffs: vec![0.0, 1.0] }]);
        let g = gram(&s, 0).unwrap();
        let expect = [[1.0, 0.5], [0.5, 1.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.sigma[(i, j)] - expect[i][j]).abs() < 1e-14);
            }
        }
        let id = &g.sigma * &g.inverse;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn terminal_gram_is_singular() {
        let r = gram(&spec(vec![Basis::Constant { value: 1.0 }]), 100);
        assert!(matches!(r, Err(Error::SingularGram { .. })));
    }

    #[test]
    fn dependent_basis_is_singular() {
        let s = spec(vec![Basis::Constant { value: 1.0 }, Basis::Constant { value: 2.0 }]);
        assert!(matches!(gram(&s, 0), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn gram_decreases_in_t() {
        let s = spec(vec![
            Basis::Constant { value: 1.0 },
            Basis::Sin { amp: 1.0, freq: 3.0, phase: 0.2 },
            Basis::Exp { scale: 1.0, rate: 0.5 },
        ]);
        for (k1, k2) in [(0, 10), (10, 50), (50, 90)] {
            let d = gram_entries(&s, k1) - gram_entries(&s, k2);
            let eig = d.symmetric_eigenvalues();
            assert!(eig.min() >= -1e-12);
        }
    }
}
