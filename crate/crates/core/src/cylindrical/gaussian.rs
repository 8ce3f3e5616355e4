use nalgebra::DVector;
use serde::Serialize;

use super::{GramMatrix, Payoff};
use crate::error::{Error, Result};
use crate::quadrature::{for_each_tensor, hermite_cached, NormalRule, TRUNCATION};

/// `p(t,z)` and its derivatives for the centered Gaussian with covariance `Σ_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDerivs {
    pub p: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    /// Row-major `n × n`.
    pub hess: Vec<f64>,
}

/// Centered Gaussian density with covariance `Σ`.
pub fn gaussian_p(g: &GramMatrix, z: &[f64]) -> f64 {
    let n = g.dim();
    let z = DVector::from_column_slice(z);
    let q = z.dot(&(&g.inverse * &z));
    (-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + g.logdet + q)).exp()
}

/// Derivatives of `p` in `z`, and in `t` through `dΣ/dt = -φ(t)φ(t)ᵀ`.
pub fn gaussian_dp(g: &GramMatrix, phi_t: &[f64], z: &[f64]) -> GaussianDerivs {
    let n = g.dim();
    let p = gaussian_p(g, z);
    let z = DVector::from_column_slice(z);
    let phi = DVector::from_column_slice(phi_t);
    let sz = &g.inverse * &z;
    let sphi = &g.inverse * &phi;
    // d log det / dt = tr(Σ⁻¹Σ̇) = -φᵀΣ⁻¹φ,  d(zᵀΣ⁻¹z)/dt = (φᵀΣ⁻¹z)²
    let a = phi.dot(&sphi);
    let c = phi.dot(&sz);
    let dt = p * (0.5 * a - 0.5 * c * c);
    let grad = sz.iter().map(|v| -p * v).collect();
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            hess[i * n + j] = p * (sz[i] * sz[j] - g.inverse[(i, j)]);
        }
    }
    GaussianDerivs { p, dt, grad, hess }
}

/// `Ψ(t,y)` with its time derivative, gradient and Hessian in `y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiDerivs {
    pub value: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    /// Row-major `n × n`.
    pub hess: Vec<f64>,
}

/// Quadrature order per axis for dimension `n`.
pub fn default_order(n: usize) -> usize {
    if n <= 2 {
        64
    } else {
        16
    }
}

/// `Ψ(t,y) = E[f(y + σLw)]`, `w` standard normal, and derivatives obtained by
/// weighting `f` with the differentiated Gaussian kernel.
pub(crate) fn psi_quadrature(payoff: &Payoff, g: &GramMatrix, phi_t: &[f64], sigma: f64, y: &[f64]) -> PsiDerivs {
    let n = g.dim();
    let q = default_order(n);
    let l00 = g.chol[(0, 0)];
    let kinks: Vec<f64> = payoff
        .kinks()
        .iter()
        .map(|k| (k - y[0]) / (sigma * l00))
        .filter(|w| w.abs() < TRUNCATION)
        .collect();
    let split;
    let first: &NormalRule = if kinks.is_empty() {
        hermite_cached(q)
    } else {
        split = NormalRule::split(2 * q, &kinks);
        &split
    };
    let rest = hermite_cached(q);
    let mut rules = vec![first];
    rules.extend(std::iter::repeat_n(rest, n - 1));

    let phi = DVector::from_column_slice(phi_t);
    let a = phi.dot(&(&g.inverse * &phi));
    let phi_m = g.chol_inv_t.transpose() * &phi; // φᵀL⁻ᵀw = (L⁻¹φ)ᵀw

    let mut value = 0.0;
    let mut dt = 0.0;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    for_each_tensor(&rules, |w, weight| {
        for i in 0..n {
            let mut z = 0.0;
            let mut vi = 0.0;
            for j in 0..n {
                z += g.chol[(i, j)] * w[j];
                vi += g.chol_inv_t[(i, j)] * w[j];
            }
            u[i] = y[i] + sigma * z;
            v[i] = vi;
        }
        let fw = weight * payoff.eval(&u);
        let c: f64 = phi_m.iter().zip(w).map(|(p, x)| p * x).sum();
        value += fw;
        dt += fw * (0.5 * a - 0.5 * c * c);
        for i in 0..n {
            grad[i] += fw * v[i];
            for j in 0..n {
                hess[i * n + j] += fw * (v[i] * v[j] - g.inverse[(i, j)]);
            }
        }
    });
    grad.iter_mut().for_each(|x| *x /= sigma);
    hess.iter_mut().for_each(|x| *x /= sigma * sigma);
    PsiDerivs { value, dt, grad, hess }
}

/// `Ψ` when no Gaussian smoothing is present (`σ = 0` or `t = T`).
pub(crate) fn psi_degenerate(payoff: &Payoff, y: &[f64], t: f64, at_terminal: bool) -> Result<PsiDerivs> {
    if !at_terminal && !payoff.is_continuous() {
        return Err(Error::Degenerate { t });
    }
    Ok(PsiDerivs {
        value: payoff.eval(y),
        dt: 0.0,
        grad: payoff.grad(y),
        hess: payoff.hess(y.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::super::gram::gram;
    use super::super::{Basis, CylindricalSpec};
    use super::*;
    use crate::path::Grid;

    fn two_dim() -> (CylindricalSpec, GramMatrix) {
        let spec = CylindricalSpec::new(
            Grid::new(1.0, 200).unwrap(),
            1.0,
            vec![Basis::Constant { value: 1.0 }, Basis::Polynomial { coeffs: vec![0.2, 1.0, -0.5] }],
            Payoff::Sum2,
        )
        .unwrap();
        let g = gram(&spec, 40).unwrap();
        (spec, g)
    }

    #[test]
    fn standard_normal_at_origin() {
        let spec = CylindricalSpec::new(Grid::new(1.0, 4).unwrap(), 1.0, vec![Basis::Constant { value: 1.0 }], Payoff::Square).unwrap();
        let g = gram(&spec, 0).unwrap();
        assert!((gaussian_p(&g, &[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn heat_identity() {
        let (spec, g) = two_dim();
        let t = g.t;
        let phi: Vec<f64> = spec.basis.iter().map(|b| b.value(t)).collect();
        for z in [[0.1, -0.2], [0.5, 0.3], [-0.4, 0.05]] {
            let d = gaussian_dp(&g, &phi, &z);
            let mut lap = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    lap += phi[i] * phi[j] * d.hess[i * 2 + j];
                }
            }
            assert!((d.dt + 0.5 * lap).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (_, g) = two_dim();
        let z = [0.2, -0.1];
        let d = gaussian_dp(&g, &[1.0, 0.0], &z);
        let h = 1e-5;
        for i in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fd = (gaussian_p(&g, &zp) - gaussian_p(&g, &zm)) / (2.0 * h);
            assert!(((fd - d.grad[i]) / d.grad[i]).abs() < 1e-6);
        }
    }
}
