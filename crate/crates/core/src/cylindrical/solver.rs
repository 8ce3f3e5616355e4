use std::sync::OnceLock;

use super::gaussian::{psi_degenerate, psi_quadrature};
use super::gram::gram;
use super::{CylindricalSpec, GramMatrix, PsiDerivs};
use crate::error::{Error, Result};
use crate::path::{cell_product, product_integral, Density, Kernel2, PathMeasure, SampledPath};
use crate::regcalc::{forward_integral, BvFunction, IntervalSpec, Mode};

/// Basis samples on the time grid.
#[derive(Clone, Debug)]
struct Samples {
    phi: Vec<Vec<f64>>,
    dphi: Vec<Vec<f64>>,
    ddphi: Vec<Vec<f64>>,
}

/// Cylindrical solver with per-time Gram caches. Read-only after construction,
/// so it can be shared across threads.
#[derive(Debug)]
pub struct CylSolver {
    spec: CylindricalSpec,
    samples: Samples,
    grams: Vec<OnceLock<Result<GramMatrix>>>,
}

impl CylSolver {
    pub fn new(spec: CylindricalSpec) -> Result<Self> {
        spec.validate()?;
        let grid = spec.grid;
        let times: Vec<f64> = (0..grid.n_nodes()).map(|k| grid.time(k)).collect();
        let sample = |f: &dyn Fn(&super::Basis, f64) -> f64| -> Vec<Vec<f64>> {
            spec.basis.iter().map(|b| times.iter().map(|&s| f(b, s)).collect()).collect()
        };
        let samples = Samples {
            phi: sample(&|b, s| b.value(s)),
            dphi: sample(&|b, s| b.d1(s)),
            ddphi: sample(&|b, s| b.d2(s)),
        };
        let grams = (0..grid.n_nodes()).map(|_| OnceLock::new()).collect();
        Ok(Self { spec, samples, grams })
    }

    pub fn spec(&self) -> &CylindricalSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn index(&self, t: f64) -> Result<usize> {
        self.spec.grid.time_index(t)
    }

    fn check_path(&self, eta: &SampledPath) -> Result<()> {
        self.spec.grid.check_same(&eta.grid())
    }

    pub fn gram_at(&self, k: usize) -> Result<&GramMatrix> {
        self.grams[k]
            .get_or_init(|| gram(&self.spec, k))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn gram(&self, t: f64) -> Result<&GramMatrix> {
        self.gram_at(self.index(t)?)
    }

    fn phi_at(&self, k: usize) -> Vec<f64> {
        self.samples.phi.iter().map(|p| p[k]).collect()
    }

    /// Features `y_i = η(0)φ_i(t) - ∫_{-t}^0 η(s)φ̇_i(s+t) ds`, i.e. the
    /// closed-interval forward integrals of `φ_i(·+t)` against `η`.
    pub fn features_at(&self, k: usize, eta: &SampledPath) -> Result<Vec<f64>> {
        self.check_path(eta)?;
        let n = self.spec.grid.n_steps();
        let h = self.spec.grid.step();
        let v = eta.values();
        Ok((0..self.dim())
            .map(|i| {
                let d = &self.samples.dphi[i];
                let mut integral = 0.0;
                for j in n - k..n {
                    let m = j + k - n;
                    integral += cell_product(h, v[j], v[j + 1], d[m], d[m + 1]);
                }
                eta.last() * self.samples.phi[i][k] - integral
            })
            .collect())
    }

    pub fn features(&self, t: f64, eta: &SampledPath) -> Result<Vec<f64>> {
        self.features_at(self.index(t)?, eta)
    }

    /// Features computed as forward integrals by the regularization module.
    pub fn features_via_forward_integral(&self, t: f64, eta: &SampledPath, mode: Mode) -> Result<Vec<f64>> {
        let k = self.index(t)?;
        self.check_path(eta)?;
        let grid = self.spec.grid;
        let n = grid.n_steps();
        let f = BvFunction::new(eta.clone(), false);
        let iv = IntervalSpec::new(-t, 0.0, mode)?;
        (0..self.dim())
            .map(|i| {
                let mut vals = vec![0.0; n + 1];
                let mut der = vec![0.0; n + 1];
                for j in n - k..=n {
                    vals[j] = self.samples.phi[i][j + k - n];
                    der[j] = self.samples.dphi[i][j + k - n];
                }
                let d = Density::new(grid, n - k, vals)?.with_derivative(der)?;
                Ok(forward_integral(&PathMeasure::absolutely_continuous(d), &f, iv)?.value)
            })
            .collect()
    }

    pub fn psi_at(&self, k: usize, y: &[f64]) -> Result<PsiDerivs> {
        let grid = self.spec.grid;
        if k == grid.n_steps() {
            return psi_degenerate(&self.spec.payoff, y, grid.horizon(), true);
        }
        if self.spec.sigma == 0.0 {
            return psi_degenerate(&self.spec.payoff, y, grid.time(k), false);
        }
        let g = self.gram_at(k)?;
        Ok(psi_quadrature(&self.spec.payoff, g, &self.phi_at(k), self.spec.sigma, y))
    }

    /// `Ψ(t,y)` with derivatives; `Ψ(T,y) = f(y)` exactly.
    pub fn psi_derivs(&self, t: f64, y: &[f64]) -> Result<PsiDerivs> {
        if t > self.spec.grid.horizon() {
            return Err(Error::Domain(format!("t = {t} beyond the horizon")));
        }
        self.psi_at(self.index(t)?, y)
    }

    pub fn psi(&self, t: f64, y: &[f64]) -> Result<f64> {
        Ok(self.psi_derivs(t, y)?.value)
    }

    pub fn u_at(&self, k: usize, eta: &SampledPath) -> Result<f64> {
        let y = self.features_at(k, eta)?;
        if k == self.spec.grid.n_steps() {
            return Ok(self.spec.payoff.eval(&y));
        }
        Ok(self.psi_at(k, &y)?.value)
    }

    pub fn u(&self, t: f64, eta: &SampledPath) -> Result<f64> {
        self.u_at(self.index(t)?, eta)
    }

    fn interior_index(&self, t: f64) -> Result<usize> {
        let k = self.index(t)?;
        if k == self.spec.grid.n_steps() {
            return Err(Error::Domain("derivatives need t < T".into()));
        }
        Ok(k)
    }

    /// `-Σ c_i φ̇_i(x+t)` on `[-t,0]`, with derivative samples `-Σ c_i φ̈_i(x+t)`.
    fn shifted_density(&self, k: usize, c: &[f64]) -> Result<Density> {
        let grid = self.spec.grid;
        let n = grid.n_steps();
        let mut vals = vec![0.0; n + 1];
        let mut der = vec![0.0; n + 1];
        for j in n - k..=n {
            let m = j + k - n;
            for (i, ci) in c.iter().enumerate() {
                vals[j] -= ci * self.samples.dphi[i][m];
                der[j] -= ci * self.samples.ddphi[i][m];
            }
        }
        Density::new(grid, n - k, vals)?.with_derivative(der)
    }

    fn du_from(&self, k: usize, d: &PsiDerivs) -> Result<PathMeasure> {
        let atom0 = d.grad.iter().zip(self.phi_at(k)).map(|(g, p)| g * p).sum();
        let density = self.shifted_density(k, &d.grad)?;
        PathMeasure::new(self.spec.grid, atom0, Vec::new(), Some(density))
    }

    fn d2u_from(&self, k: usize, d: &PsiDerivs) -> Result<Kernel2> {
        let n = self.dim();
        let phi = self.phi_at(k);
        let mut kern = Kernel2::zero(self.spec.grid);
        let mut cross = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let h = d.hess[i * n + j];
                kern.atom00 += h * phi[i] * phi[j];
                cross[i] += h * phi[j];
            }
        }
        if k > 0 {
            let cross_density = self.shifted_density(k, &cross)?;
            kern.cross_x = Some(cross_density.clone());
            kern.cross_y = Some(cross_density);
            let units: Vec<Density> = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    self.shifted_density(k, &e)
                })
                .collect::<Result<_>>()?;
            for i in 0..n {
                for j in 0..n {
                    let h = d.hess[i * n + j];
                    if h != 0.0 {
                        kern = kern.with_term(h, units[i].clone(), units[j].clone())?;
                    }
                }
            }
        }
        Ok(kern)
    }

    /// `I_i = η(0)φ̇_i(t) - η(-t)φ̇_i(0) - ∫_{-t}^0 η(s)φ̈_i(s+t) ds`.
    fn time_terms(&self, k: usize, eta: &SampledPath) -> Vec<f64> {
        let grid = self.spec.grid;
        let n = grid.n_steps();
        let v = eta.values();
        (0..self.dim())
            .map(|i| {
                let dd = &self.samples.ddphi[i];
                let mut shifted = vec![0.0; n + 1];
                for j in n - k..=n {
                    shifted[j] = dd[j + k - n];
                }
                let integral = product_integral(grid.step(), v, &shifted, n - k, n);
                eta.last() * self.samples.dphi[i][k] - v[n - k] * self.samples.dphi[i][0] - integral
            })
            .collect()
    }

    fn derivs(&self, t: f64, eta: &SampledPath) -> Result<(usize, PsiDerivs)> {
        let k = self.interior_index(t)?;
        let y = self.features_at(k, eta)?;
        Ok((k, self.psi_at(k, &y)?))
    }

    /// `Du(t,η)`: `δ₀` weight `Σ∂_iΨ φ_i(t)` and density `-Σ∂_iΨ φ̇_i(x+t)` on `[-t,0]`.
    pub fn du(&self, t: f64, eta: &SampledPath) -> Result<PathMeasure> {
        let (k, d) = self.derivs(t, eta)?;
        self.du_from(k, &d)
    }

    /// `D^{δ₀}u` only, from precomputed features.
    pub fn du_atom0_at(&self, k: usize, y: &[f64]) -> Result<f64> {
        let d = self.psi_at(k, y)?;
        Ok(d.grad.iter().zip(self.phi_at(k)).map(|(g, p)| g * p).sum())
    }

    pub fn d2u(&self, t: f64, eta: &SampledPath) -> Result<Kernel2> {
        let (k, d) = self.derivs(t, eta)?;
        self.d2u_from(k, &d)
    }

    pub fn dtu(&self, t: f64, eta: &SampledPath) -> Result<f64> {
        let (k, d) = self.derivs(t, eta)?;
        let terms = self.time_terms(k, eta);
        Ok(d.dt + d.grad.iter().zip(&terms).map(|(g, i)| g * i).sum::<f64>())
    }

    /// `∂_t u + ∫_{]-t,0]} D^{ac}u d⁻η + ½σ² D²u({0,0})`, each term computed
    /// separately (the forward integral by the regularization module).
    pub fn residual(&self, t: f64, eta: &SampledPath) -> Result<f64> {
        let (k, d) = self.derivs(t, eta)?;
        let terms = self.time_terms(k, eta);
        let dtu = d.dt + d.grad.iter().zip(&terms).map(|(g, i)| g * i).sum::<f64>();
        let du = self.du_from(k, &d)?;
        let density = du.density().cloned().expect("du always carries a density");
        let fi = forward_integral(
            &PathMeasure::absolutely_continuous(density),
            &BvFunction::new(eta.clone(), false),
            IntervalSpec::open(-t, 0.0)?,
        )?;
        let atom00 = self.d2u_from(k, &d)?.atom00;
        let s2 = self.spec.sigma * self.spec.sigma;
        Ok(dtu + fi.value + 0.5 * s2 * atom00)
    }
}

/// Features of the windows `X_{t_k}(·)` of a trajectory fed one node at a time,
/// so that step `k` only ever sees `X(t_0..t_k)`.
pub struct FeatureAccumulator<'a> {
    solver: &'a CylSolver,
    k: usize,
    last: f64,
    integrals: Vec<f64>,
}

impl<'a> FeatureAccumulator<'a> {
    pub fn new(solver: &'a CylSolver, x0: f64) -> Self {
        Self { solver, k: 0, last: x0, integrals: vec![0.0; solver.dim()] }
    }

    pub fn index(&self) -> usize {
        self.k
    }

    /// Features of the current window.
    pub fn features(&self) -> Vec<f64> {
        (0..self.solver.dim())
            .map(|i| self.last * self.solver.samples.phi[i][self.k] - self.integrals[i])
            .collect()
    }

    /// Append `X(t_{k+1})`.
    pub fn push(&mut self, x: f64) {
        let h = self.solver.spec.grid.step();
        let k = self.k;
        for i in 0..self.solver.dim() {
            let d = &self.solver.samples.dphi[i];
            self.integrals[i] += cell_product(h, self.last, x, d[k], d[k + 1]);
        }
        self.last = x;
        self.k += 1;
    }
}
