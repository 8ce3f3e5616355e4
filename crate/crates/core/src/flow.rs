//! Functional Brownian and Markovian stochastic flows on the window space.
//!
//! `Y_t^{s,η}(x) = η(x+t-s)` for `x < s-t`, and `X_r` at `r = t+x` otherwise,
//! where `X` starts from `η(0)` at time `s`. Flows are index shifts on the
//! shared grid; increments are accumulated left to right, so composing flows
//! reproduces the direct flow bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{modulus, Grid, SampledPath, Trajectory};
use crate::rng::{derive_seed, NormalStream, BROWNIAN};
use crate::stats::{ks_critical, ks_two_sample, map_paths};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub grid: Grid,
    pub sigma: f64,
    pub seed: u64,
}

impl FlowParams {
    pub fn new(grid: Grid, sigma: f64, seed: u64) -> Result<Self> {
        if grid.n_steps() < 2 {
            return Err(Error::Invalid("flows need at least 2 steps".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { grid, sigma, seed })
    }
}

/// Standard Brownian motion on the grid of `params`, path `index` of the seed's family.
pub fn sample_brownian(params: &FlowParams, index: u64) -> Trajectory {
    brownian_on(params.grid, params.seed, index)
}

pub(crate) fn brownian_on(grid: Grid, seed: u64, index: u64) -> Trajectory {
    let mut stream = NormalStream::new(seed, BROWNIAN, index);
    let sd = grid.step().sqrt();
    let mut values = Vec::with_capacity(grid.n_nodes());
    let mut w = 0.0;
    values.push(w);
    for _ in 0..grid.n_steps() {
        w += sd * stream.normal();
        values.push(w);
    }
    Trajectory::new(grid, values).expect("sized")
}

fn indices(grid: &Grid, s: f64, t: f64) -> Result<(usize, usize)> {
    let ks = grid.time_index(s)?;
    let kt = grid.time_index(t)?;
    if ks > kt {
        return Err(Error::Domain(format!("flow needs s <= t, got s = {s}, t = {t}")));
    }
    Ok((ks, kt))
}

/// Assemble `Y` from the shifted head of `η` and the state values `x[0..=kt-ks]`.
fn assemble(eta: &SampledPath, ks: usize, kt: usize, states: &[f64]) -> SampledPath {
    let grid = eta.grid();
    let n = grid.n_steps();
    let d = kt - ks;
    let mut out = Vec::with_capacity(n + 1);
    out.extend_from_slice(&eta.values()[d..]);
    out.extend_from_slice(&states[1..]);
    SampledPath::new(grid, out).expect("sized")
}

/// Functional Brownian flow `Y_t^{s,η}` driven by `W`.
pub fn flow_brownian(s: f64, t: f64, eta: &SampledPath, w: &Trajectory, sigma: f64) -> Result<SampledPath> {
    let grid = eta.grid();
    grid.check_same(&w.grid())?;
    let (ks, kt) = indices(&grid, s, t)?;
    Ok(flow_brownian_at(ks, kt, eta, w, sigma))
}

pub(crate) fn flow_brownian_at(ks: usize, kt: usize, eta: &SampledPath, w: &Trajectory, sigma: f64) -> SampledPath {
    let wv = w.values();
    let mut states = Vec::with_capacity(kt - ks + 1);
    let mut x = eta.last();
    states.push(x);
    for m in ks..kt {
        x += sigma * (wv[m + 1] - wv[m]);
        states.push(x);
    }
    assemble(eta, ks, kt, &states)
}

/// Drift and diffusion of `dX = b(t,X)dt + σ(t,X)dW` with declared Lipschitz constants.
pub trait Coefficients: Sync {
    fn drift(&self, t: f64, x: f64) -> f64;
    fn diffusion(&self, t: f64, x: f64) -> f64;
    /// Lipschitz constants of `(b, σ)` in `x`.
    fn lipschitz(&self) -> (f64, f64);
}

/// `b = b0 + b1 x`, `σ = s0 + s1 x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub s0: f64,
    pub s1: f64,
}

impl LinearCoefficients {
    pub fn constant_sigma(sigma: f64) -> Self {
        Self { b0: 0.0, b1: 0.0, s0: sigma, s1: 0.0 }
    }

    /// `b = -θx`, constant `σ`.
    pub fn ornstein_uhlenbeck(theta: f64, sigma: f64) -> Self {
        Self { b0: 0.0, b1: -theta, s0: sigma, s1: 0.0 }
    }
}

impl Coefficients for LinearCoefficients {
    fn drift(&self, _t: f64, x: f64) -> f64 {
        self.b0 + self.b1 * x
    }

    fn diffusion(&self, _t: f64, x: f64) -> f64 {
        self.s0 + self.s1 * x
    }

    fn lipschitz(&self) -> (f64, f64) {
        (self.b1.abs(), self.s1.abs())
    }
}

/// Euler–Maruyama state values from `η(0)` at index `ks` to index `kt`.
fn euler_states(ks: usize, kt: usize, x0: f64, coeffs: &dyn Coefficients, w: &Trajectory) -> Result<Vec<f64>> {
    let grid = w.grid();
    let h = grid.step();
    let wv = w.values();
    let mut states = Vec::with_capacity(kt - ks + 1);
    let mut x = x0;
    states.push(x);
    for m in ks..kt {
        let t = grid.time(m);
        x = x + coeffs.drift(t, x) * h + coeffs.diffusion(t, x) * (wv[m + 1] - wv[m]);
        if !x.is_finite() || x.abs() > 1e150 {
            return Err(Error::IntegrationDiverged { step: m + 1, state: x });
        }
        states.push(x);
    }
    Ok(states)
}

/// Functional Markovian flow with Euler–Maruyama on the grid of `W`.
pub fn flow_markovian(
    s: f64,
    t: f64,
    eta: &SampledPath,
    coeffs: &dyn Coefficients,
    w: &Trajectory,
) -> Result<SampledPath> {
    let grid = eta.grid();
    grid.check_same(&w.grid())?;
    let (ks, kt) = indices(&grid, s, t)?;
    let states = euler_states(ks, kt, eta.last(), coeffs, w)?;
    Ok(assemble(eta, ks, kt, &states))
}

fn sup_diff(a: &SampledPath, b: &SampledPath) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `‖Y_r^{s,η} - Y_r^{t, Y_t^{s,η}}‖∞` for the Brownian flow.
pub fn check_flow_property(s: f64, t: f64, r: f64, eta: &SampledPath, w: &Trajectory, sigma: f64) -> Result<f64> {
    if !(s <= t && t <= r) {
        return Err(Error::Domain(format!("need s <= t <= r, got {s}, {t}, {r}")));
    }
    let direct = flow_brownian(s, r, eta, w, sigma)?;
    let mid = flow_brownian(s, t, eta, w, sigma)?;
    let composed = flow_brownian(t, r, &mid, w, sigma)?;
    Ok(sup_diff(&direct, &composed))
}

/// Same identity for the Euler Markovian flow on one grid.
pub fn check_flow_property_markovian(
    s: f64,
    t: f64,
    r: f64,
    eta: &SampledPath,
    coeffs: &dyn Coefficients,
    w: &Trajectory,
) -> Result<f64> {
    if !(s <= t && t <= r) {
        return Err(Error::Domain(format!("need s <= t <= r, got {s}, {t}, {r}")));
    }
    let direct = flow_markovian(s, r, eta, coeffs, w)?;
    let mid = flow_markovian(s, t, eta, coeffs, w)?;
    let composed = flow_markovian(t, r, &mid, coeffs, w)?;
    Ok(sup_diff(&direct, &composed))
}

/// Mean sup-norm deviation of the composed Euler flow `Y_r^{t,Y_t^{s,η}}` on a
/// grid of `n` steps from a fine reference `Y_r^{s,η}` on `fine_n` steps, both
/// driven by the same Brownian path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongDeviation {
    pub n_steps: usize,
    pub mean_deviation: f64,
    pub std_error: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn markovian_strong_deviation(
    horizon: f64,
    times: (f64, f64, f64),
    eta: &(dyn Fn(f64) -> f64 + Sync),
    coeffs: &dyn Coefficients,
    coarse: &[usize],
    fine_n: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<StrongDeviation>> {
    let fine = Grid::new(horizon, fine_n)?;
    let (s, t, r) = times;
    let per_path: Vec<Result<Vec<f64>>> = map_paths(n_paths, |p| {
        let w_fine = brownian_on(fine, seed, p as u64);
        let reference = flow_markovian(s, r, &SampledPath::from_fn(fine, eta), coeffs, &w_fine)?;
        coarse
            .iter()
            .map(|&n| {
                if !fine_n.is_multiple_of(n) {
                    return Err(Error::Invalid(format!("{n} steps do not divide {fine_n}")));
                }
                let factor = fine_n / n;
                let w = w_fine.coarsen(factor)?;
                let eta_c = SampledPath::from_fn(w.grid(), eta);
                let mid = flow_markovian(s, t, &eta_c, coeffs, &w)?;
                let y = flow_markovian(t, r, &mid, coeffs, &w)?;
                Ok(y
                    .values()
                    .iter()
                    .enumerate()
                    .fold(0.0_f64, |m, (j, v)| m.max((v - reference.value(j * factor)).abs())))
            })
            .collect()
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;
    Ok(coarse
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let devs: Vec<f64> = per_path.iter().map(|d| d[i]).collect();
            let est = crate::stats::MCEstimate::from_samples(&devs, seed);
            StrongDeviation { n_steps: n, mean_deviation: est.value, std_error: est.std_error }
        })
        .collect())
}

/// Per-probe two-sample KS statistics for `Y_t^{s,η}` against `Y_{t-s}^{0,η}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTable {
    pub probes: Vec<f64>,
    pub statistics: Vec<f64>,
    pub max: f64,
    pub critical: f64,
}

/// Number of probe points used by [`check_time_homogeneity`].
pub const KS_PROBES: usize = 8;

pub fn check_time_homogeneity(
    params: &FlowParams,
    s: f64,
    t: f64,
    eta: &SampledPath,
    n_paths: usize,
    alpha: f64,
) -> Result<KsTable> {
    let grid = params.grid;
    grid.check_same(&eta.grid())?;
    let (ks, kt) = indices(&grid, s, t)?;
    let n = grid.n_steps();
    let probe_idx: Vec<usize> = (1..=KS_PROBES).map(|j| j * n / KS_PROBES).collect();
    let other_seed = derive_seed(params.seed, 1);
    let sample = |seed: u64, a: usize, b: usize| -> Vec<Vec<f64>> {
        map_paths(n_paths, |p| {
            let w = brownian_on(grid, seed, p as u64);
            let y = flow_brownian_at(a, b, eta, &w, params.sigma);
            probe_idx.iter().map(|&j| y.value(j)).collect()
        })
    };
    let left = sample(params.seed, ks, kt);
    let right = sample(other_seed, 0, kt - ks);
    let statistics: Vec<f64> = (0..KS_PROBES)
        .map(|i| {
            let a: Vec<f64> = left.iter().map(|v| v[i]).collect();
            let b: Vec<f64> = right.iter().map(|v| v[i]).collect();
            ks_two_sample(&a, &b)
        })
        .collect();
    Ok(KsTable {
        probes: probe_idx.iter().map(|&j| grid.x(j)).collect(),
        max: statistics.iter().copied().fold(0.0, f64::max),
        statistics,
        critical: ks_critical(alpha, n_paths, n_paths),
    })
}

/// `‖Y_t^{s,η} - Y_{t'}^{s,η}‖∞` against `2ϖ_η(|t-t'|) + 2σϖ_W(|t-t'|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityCheck {
    pub deviation: f64,
    pub bound: f64,
}

impl ContinuityCheck {
    pub fn margin(&self) -> f64 {
        self.bound - self.deviation
    }
}

pub fn check_continuity(s: f64, t: f64, t2: f64, eta: &SampledPath, w: &Trajectory, sigma: f64) -> Result<ContinuityCheck> {
    let a = flow_brownian(s, t, eta, w, sigma)?;
    let b = flow_brownian(s, t2, eta, w, sigma)?;
    let grid = eta.grid();
    let lag = grid.time_index(t)?.abs_diff(grid.time_index(t2)?);
    let bound = 2.0 * eta.modulus(lag) + 2.0 * sigma * modulus(w.values(), lag);
    Ok(ContinuityCheck { deviation: sup_diff(&a, &b), bound })
}

/// Constant used in the growth bound `‖Y_T^{t,η}‖∞ ≤ C(1 + ‖η‖∞ + σ sup|W|)`.
pub const GROWTH_CONSTANT: f64 = 2.0;

/// `(‖Y_T^{t,η}‖∞, C(1 + ‖η‖∞ + σ sup|W|))`.
pub fn growth_bound(t: f64, eta: &SampledPath, w: &Trajectory, sigma: f64) -> Result<(f64, f64)> {
    let y = flow_brownian(t, eta.grid().horizon(), eta, w, sigma)?;
    Ok((y.sup_norm(), GROWTH_CONSTANT * (1.0 + eta.sup_norm() + sigma * w.sup_norm())))
}
