//! Pathwise check of the representation
//! `h = u(0, X_0(·)) + ∫_0^T D^{δ₀}u(t, X_t(·)) d⁻X_t`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cylindrical::{Basis, CylSolver, CylindricalSpec, FeatureAccumulator, Payoff};
use crate::error::{Error, Result};
use crate::flow::brownian_on;
use crate::path::{Grid, SampledPath, Trajectory};
use crate::rng::{derive_seed, NormalStream, FBM};
use crate::smooth::{Builtin, FunctionalH, SmoothSolver};
use crate::stats::{map_paths, MCEstimate};

/// Largest grid accepted for the Cholesky fBM generator.
pub const MAX_FBM_STEPS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriverKind {
    Brownian,
    BrownianPlusFbm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverSpec {
    pub kind: DriverKind,
    pub sigma: f64,
    #[serde(default)]
    pub hurst: Option<f64>,
    pub grid: Grid,
    pub n_paths: usize,
    pub seed: u64,
}

impl DriverSpec {
    pub fn brownian(grid: Grid, sigma: f64, n_paths: usize, seed: u64) -> Self {
        Self { kind: DriverKind::Brownian, sigma, hurst: None, grid, n_paths, seed }
    }

    pub fn brownian_plus_fbm(grid: Grid, sigma: f64, hurst: f64, n_paths: usize, seed: u64) -> Self {
        Self { kind: DriverKind::BrownianPlusFbm, sigma, hurst: Some(hurst), grid, n_paths, seed }
    }

    pub fn with_grid(&self, grid: Grid) -> Self {
        Self { grid, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if self.n_paths == 0 {
            return Err(Error::Invalid("n_paths must be positive".into()));
        }
        if self.kind == DriverKind::BrownianPlusFbm {
            let h = self.hurst.ok_or_else(|| Error::Invalid("fbm driver needs a hurst exponent".into()))?;
            if !(h > 0.5 && h < 1.0) {
                return Err(Error::Invalid(format!("hurst must lie in (1/2, 1), got {h}")));
            }
            if self.grid.n_steps() > MAX_FBM_STEPS {
                return Err(Error::Invalid(format!(
                    "fbm driver supports at most {MAX_FBM_STEPS} steps, got {}",
                    self.grid.n_steps()
                )));
            }
        }
        Ok(())
    }
}

/// Exact fBM sampler from the Cholesky factor of its covariance on `t_1..t_N`.
#[derive(Debug)]
pub struct FbmGenerator {
    grid: Grid,
    hurst: f64,
    chol: DMatrix<f64>,
}

type FbmCache = Mutex<HashMap<(u64, usize, u64), Arc<FbmGenerator>>>;

impl FbmGenerator {
    pub fn new(grid: Grid, hurst: f64) -> Result<Self> {
        let n = grid.n_steps();
        let two_h = 2.0 * hurst;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let (s, t) = (grid.time(i + 1), grid.time(j + 1));
            0.5 * (s.powf(two_h) + t.powf(two_h) - (t - s).abs().powf(two_h))
        });
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Internal(format!("fbm covariance not positive definite (H = {hurst}, N = {n})")))?;
        Ok(Self { grid, hurst, chol: chol.l() })
    }

    /// Shared generator for `(grid, hurst)`, factorized once.
    pub fn cached(grid: Grid, hurst: f64) -> Result<Arc<FbmGenerator>> {
        static CACHE: OnceLock<FbmCache> = OnceLock::new();
        let key = (grid.horizon().to_bits(), grid.n_steps(), hurst.to_bits());
        let cache = CACHE.get_or_init(Default::default);
        if let Some(g) = cache.lock().expect("fbm cache").get(&key) {
            return Ok(g.clone());
        }
        let g = Arc::new(FbmGenerator::new(grid, hurst)?);
        cache.lock().expect("fbm cache").entry(key).or_insert(g.clone());
        Ok(g)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn sample(&self, seed: u64, index: u64) -> Trajectory {
        let n = self.grid.n_steps();
        let mut stream = NormalStream::new(seed, FBM, index);
        let mut z = vec![0.0; n];
        stream.fill_normals(&mut z);
        let mut values = vec![0.0; n + 1];
        for i in 0..n {
            let row = self.chol.row(i);
            values[i + 1] = (0..=i).map(|j| row[j] * z[j]).sum();
        }
        Trajectory::new(self.grid, values).expect("sized")
    }
}

/// Driver path `index`: `σW`, or `σW + B^H` with `W` and `B^H` independent.
pub fn sample_driver(spec: &DriverSpec, index: u64) -> Result<Trajectory> {
    spec.validate()?;
    let w = brownian_on(spec.grid, spec.seed, index).scaled(spec.sigma);
    match spec.kind {
        DriverKind::Brownian => Ok(w),
        DriverKind::BrownianPlusFbm => {
            let b = FbmGenerator::cached(spec.grid, spec.hurst.expect("validated"))?.sample(spec.seed, index);
            let values = w.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
            Trajectory::new(spec.grid, values)
        }
    }
}

/// Left-point sum `Σ a_k (X_{t_{k+1}} - X_{t_k})`.
pub fn forward_stochastic_integral(a: &[f64], x: &Trajectory) -> Result<f64> {
    let n = x.grid().n_steps();
    if a.len() != n {
        return Err(Error::Invalid(format!("integrand needs {n} samples, got {}", a.len())));
    }
    let v = x.values();
    Ok(a.iter().enumerate().map(|(k, ak)| ak * (v[k + 1] - v[k])).sum())
}

/// `Σ (X_{t_{k+1}} - X_{t_k})²`.
pub fn quadratic_variation(x: &Trajectory) -> f64 {
    x.values().windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

/// Solver whose `D^{δ₀}u` drives the representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Cylindrical { basis: Vec<Basis>, payoff: Payoff },
    /// `D^{δ₀}u` by inner Monte Carlo with `inner_pairs` antithetic pairs per step,
    /// `u(0,·)` with `reference_paths` paths.
    Smooth { functional: Builtin, inner_pairs: usize, reference_paths: usize },
}

/// One row of the convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub rmse_rel: f64,
    pub bias: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    /// `u(0, X_0(·))`.
    pub u0: f64,
    pub rmse_rel: f64,
    pub bias: f64,
    pub convergence_table: Vec<ConvergenceRow>,
}

/// Per-path value of `h` and of the representation residual.
struct PathResult {
    h: f64,
    residual: f64,
}

fn summarize(n_steps: usize, paths: &[PathResult], seed: u64) -> ConvergenceRow {
    let n = paths.len() as f64;
    let r: Vec<f64> = paths.iter().map(|p| p.residual).collect();
    let ms_r = r.iter().map(|x| x * x).sum::<f64>() / n;
    let ms_h = paths.iter().map(|p| p.h * p.h).sum::<f64>() / n;
    let est = MCEstimate::from_samples(&r, seed);
    ConvergenceRow { n_steps, rmse_rel: (ms_r / ms_h).sqrt(), bias: est.value, se: est.std_error }
}

fn cylindrical_row(basis: &[Basis], payoff: &Payoff, driver: &DriverSpec) -> Result<(f64, ConvergenceRow)> {
    let grid = driver.grid;
    let n = grid.n_steps();
    let solver = CylSolver::new(CylindricalSpec::new(grid, driver.sigma, basis.to_vec(), payoff.clone())?)?;
    let u0 = solver.u_at(0, &SampledPath::zero(grid))?;
    let paths: Vec<PathResult> = map_paths(driver.n_paths, |p| {
        let x = sample_driver(driver, p as u64)?;
        let v = x.values();
        let mut acc = FeatureAccumulator::new(&solver, v[0]);
        let mut a = Vec::with_capacity(n);
        for k in 0..n {
            a.push(solver.du_atom0_at(k, &acc.features())?);
            acc.push(v[k + 1]);
        }
        let h = payoff.eval(&acc.features());
        let integral = forward_stochastic_integral(&a, &x)?;
        Ok(PathResult { h, residual: h - u0 - integral })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((u0, summarize(n, &paths, driver.seed)))
}

fn smooth_row(functional: &Builtin, inner_pairs: usize, reference_paths: usize, driver: &DriverSpec) -> Result<(f64, ConvergenceRow)> {
    let grid = driver.grid;
    let n = grid.n_steps();
    let solver = SmoothSolver::new(functional.compile(grid), driver.sigma)?;
    let zero = SampledPath::zero(grid);
    let u0 = solver.u(0.0, &zero, reference_paths, derive_seed(driver.seed, 0x30))?.value;
    let paths: Vec<PathResult> = map_paths(driver.n_paths, |p| {
        let x = sample_driver(driver, p as u64)?;
        let inner_seed = derive_seed(driver.seed, 0x1000 + p as u64);
        // windows are cut from the prefix X(t_0..t_k) only
        let a: Vec<f64> = (0..n)
            .map(|k| {
                let prefix = Trajectory::new(grid, prefix_values(x.values(), k)).expect("sized");
                solver.du_atom0_antithetic(k, &prefix.window_at(k), inner_pairs, inner_seed)
            })
            .collect();
        let h = solver.functional().eval(&x.window_at(n));
        let integral = forward_stochastic_integral(&a, &x)?;
        Ok(PathResult { h, residual: h - u0 - integral })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((u0, summarize(n, &paths, driver.seed)))
}

/// `X(t_0..t_k)` followed by copies of `X(t_k)`.
fn prefix_values(v: &[f64], k: usize) -> Vec<f64> {
    let mut out = v[..=k].to_vec();
    out.resize(v.len(), v[k]);
    out
}

/// Residual statistics of the representation on `driver.grid`, plus a
/// convergence table over the horizons' grids with `n_list` steps.
pub fn representation_check(solver: &SolverSpec, driver: &DriverSpec, n_list: &[usize]) -> Result<RepresentationReport> {
    driver.validate()?;
    let row = |d: &DriverSpec| match solver {
        SolverSpec::Cylindrical { basis, payoff } => cylindrical_row(basis, payoff, d),
        SolverSpec::Smooth { functional, inner_pairs, reference_paths } => {
            smooth_row(functional, *inner_pairs, *reference_paths, d)
        }
    };
    let (u0, main) = row(driver)?;
    let mut table = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == driver.grid.n_steps() {
            table.push(main.clone());
        } else {
            let d = driver.with_grid(Grid::new(driver.grid.horizon(), n)?);
            table.push(row(&d)?.1);
        }
    }
    Ok(RepresentationReport { u0, rmse_rel: main.rmse_rel, bias: main.bias, convergence_table: table })
}
