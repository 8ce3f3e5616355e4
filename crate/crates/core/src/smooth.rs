//! Monte Carlo solution `u(t,η) = E[H(Y_T^{t,η})]` for smooth terminal
//! functionals, with its Fréchet and time derivatives.
//!
//! `Y_T^{t,η}` has the law of `Y_{T-t}^{0,η}`, so each path draws only the
//! `N - k` increments of a Brownian motion started at time `t`. Every
//! estimator evaluated with the same `(n_paths, seed)` sees the same paths.

use serde::{Deserialize, Serialize};

use crate::cylindrical::Basis;
use crate::error::{Error, Result};
use crate::path::{product_integral, Density, Grid, Kernel2, PathMeasure, SampledPath};
use crate::regcalc::{forward_integral, BvFunction, IntervalSpec};
use crate::rng::{derive_seed, NormalStream, BROWNIAN, INNER};
use crate::stats::{combined_se, map_paths, MCEstimate};

/// A terminal functional with analytic first and second Fréchet derivatives.
pub trait FunctionalH: Sync {
    fn grid(&self) -> Grid;
    fn eval(&self, eta: &SampledPath) -> f64;
    /// Density of `D H(η)` (no atoms), carrying derivative samples.
    fn d1(&self, eta: &SampledPath) -> Density;
    fn d2(&self, eta: &SampledPath) -> Kernel2;
    /// Exponent `p` of `|H(η)| ≤ c (1 + ‖η‖∞^p)`.
    fn growth_p(&self) -> f64;
    /// Constant `c` of the growth bound.
    fn growth_constant(&self) -> f64;
    /// Declared bound on `‖DH(η)‖_{H¹}` given `‖η‖∞`.
    fn h1_bound(&self, sup: f64) -> f64;
}

/// Builtin functionals of linear features `L_g(η) = ∫_{-T}^0 η(s) g(s) ds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    /// `L_g`
    Linear { g: Basis },
    /// `L_g²`
    Quadratic { g: Basis },
    /// `L_g³`
    Cubic { g: Basis },
    /// `L_{g1} L_{g2}`
    Product { g1: Basis, g2: Basis },
}

impl Builtin {
    /// `(∫η)²`.
    pub fn square_of_integral() -> Self {
        Builtin::Quadratic { g: Basis::Constant { value: 1.0 } }
    }

    pub fn compile(&self, grid: Grid) -> PolyFunctional {
        let sample = |b: &Basis| Weight {
            values: (0..grid.n_nodes()).map(|j| b.value(grid.x(j))).collect(),
            derivative: (0..grid.n_nodes()).map(|j| b.d1(grid.x(j))).collect(),
        };
        let (degree, weights) = match self {
            Builtin::Linear { g } => (1, vec![sample(g)]),
            Builtin::Quadratic { g } => (2, vec![sample(g)]),
            Builtin::Cubic { g } => (3, vec![sample(g)]),
            Builtin::Product { g1, g2 } => (2, vec![sample(g1), sample(g2)]),
        };
        PolyFunctional { grid, degree, weights }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Weight {
    values: Vec<f64>,
    derivative: Vec<f64>,
}

/// A compiled [`Builtin`]: a monomial in one or two linear features.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFunctional {
    grid: Grid,
    degree: u32,
    weights: Vec<Weight>,
}

impl PolyFunctional {
    fn feature(&self, i: usize, eta: &SampledPath) -> f64 {
        let n = self.grid.n_steps();
        product_integral(self.grid.step(), &self.weights[i].values, eta.values(), 0, n)
    }

    fn density(&self, parts: &[(f64, usize)]) -> Density {
        let nodes = self.grid.n_nodes();
        let mut values = vec![0.0; nodes];
        let mut derivative = vec![0.0; nodes];
        for &(c, i) in parts {
            let w = &self.weights[i];
            for j in 0..nodes {
                values[j] += c * w.values[j];
                derivative[j] += c * w.derivative[j];
            }
        }
        Density::new(self.grid, 0, values)
            .and_then(|d| d.with_derivative(derivative))
            .expect("sized")
    }

    fn l1(&self, i: usize) -> f64 {
        let v: Vec<f64> = self.weights[i].values.iter().map(|x| x.abs()).collect();
        crate::path::linear_integral(self.grid.step(), &v, 0, self.grid.n_steps())
    }

    fn h1(&self, i: usize) -> f64 {
        let w = &self.weights[i];
        let (h, n) = (self.grid.step(), self.grid.n_steps());
        (product_integral(h, &w.values, &w.values, 0, n) + product_integral(h, &w.derivative, &w.derivative, 0, n)).sqrt()
    }
}

impl FunctionalH for PolyFunctional {
    fn grid(&self) -> Grid {
        self.grid
    }

    fn eval(&self, eta: &SampledPath) -> f64 {
        let l = self.feature(0, eta);
        if self.weights.len() == 2 {
            l * self.feature(1, eta)
        } else {
            l.powi(self.degree as i32)
        }
    }

    fn d1(&self, eta: &SampledPath) -> Density {
        let l = self.feature(0, eta);
        if self.weights.len() == 2 {
            let l2 = self.feature(1, eta);
            return self.density(&[(l2, 0), (l, 1)]);
        }
        let c = match self.degree {
            1 => 1.0,
            2 => 2.0 * l,
            _ => 3.0 * l * l,
        };
        self.density(&[(c, 0)])
    }

    fn d2(&self, eta: &SampledPath) -> Kernel2 {
        let k = Kernel2::zero(self.grid);
        let g = |i: usize| self.density(&[(1.0, i)]);
        let out = if self.weights.len() == 2 {
            k.with_term(1.0, g(0), g(1)).and_then(|k| k.with_term(1.0, g(1), g(0)))
        } else {
            match self.degree {
                1 => Ok(k),
                2 => k.with_term(2.0, g(0), g(0)),
                _ => k.with_term(6.0 * self.feature(0, eta), g(0), g(0)),
            }
        };
        out.expect("same grid")
    }

    fn growth_p(&self) -> f64 {
        if self.weights.len() == 2 {
            2.0
        } else {
            self.degree as f64
        }
    }

    fn growth_constant(&self) -> f64 {
        if self.weights.len() == 2 {
            self.l1(0) * self.l1(1)
        } else {
            self.l1(0).powi(self.degree as i32)
        }
    }

    fn h1_bound(&self, sup: f64) -> f64 {
        let k = if self.weights.len() == 2 {
            self.l1(1) * self.h1(0) + self.l1(0) * self.h1(1)
        } else {
            self.degree as f64 * self.l1(0).powi(self.degree as i32 - 1) * self.h1(0)
        };
        k * (1.0 + sup.powf(self.growth_p()))
    }
}

/// Estimate of `Du(t,η)`: the mean measure and per-component errors.
#[derive(Clone, Debug, PartialEq)]
pub struct DuEstimate {
    pub measure: PathMeasure,
    pub atom0: MCEstimate,
    /// Standard error of each density sample.
    pub density_se: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct D2uEstimate {
    pub kernel: Kernel2,
    pub atom00: MCEstimate,
}

/// All estimates at one `(t,η)` from one set of paths.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothEstimates {
    pub u: MCEstimate,
    pub du: DuEstimate,
    pub atom00: MCEstimate,
    pub dtu: MCEstimate,
    pub residual: MCEstimate,
}

struct PathTerms {
    h: f64,
    du: PathMeasure,
    atom00: f64,
    forward: f64,
}

/// One row of [`SmoothSolver::martingale_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    pub deviation: f64,
    pub combined_se: f64,
}

/// Result of the probe-based hypothesis diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub n_probes: usize,
    /// Largest `‖DH(η)‖_{H¹} / h1_bound(‖η‖∞)` over probes and scales.
    pub max_h1_ratio: f64,
    /// Largest `|H(η)| / (c(1 + ‖η‖∞^p))`.
    pub max_growth_ratio: f64,
    pub max_asymmetry: f64,
    pub pass: bool,
}

pub struct SmoothSolver<H: FunctionalH> {
    h: H,
    sigma: f64,
}

impl<H: FunctionalH> SmoothSolver<H> {
    pub fn new(h: H, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { h, sigma })
    }

    pub fn functional(&self) -> &H {
        &self.h
    }

    pub fn grid(&self) -> Grid {
        self.h.grid()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn index(&self, t: f64, eta: &SampledPath) -> Result<usize> {
        let grid = self.grid();
        grid.check_same(&eta.grid())?;
        grid.time_index(t)
    }

    /// `Y_T^{t_k,η}` from the path `p` of the stream family `(seed, purpose)`.
    /// With `negate` the Brownian increments change sign.
    fn terminal(&self, k: usize, eta: &SampledPath, seed: u64, purpose: u64, p: u64, negate: bool) -> SampledPath {
        let grid = self.grid();
        let n = grid.n_steps();
        let d = n - k;
        let mut stream = NormalStream::new(seed, purpose, p);
        let scale = if negate { -self.sigma } else { self.sigma } * grid.step().sqrt();
        let mut values = Vec::with_capacity(n + 1);
        values.extend_from_slice(&eta.values()[d..]);
        let mut x = eta.last();
        for _ in 0..d / 2 {
            let (a, b) = stream.normal_pair();
            x += scale * a;
            values.push(x);
            x += scale * b;
            values.push(x);
        }
        if d % 2 == 1 {
            x += scale * stream.normal();
            values.push(x);
        }
        SampledPath::new(grid, values).expect("sized")
    }

    fn gate(&self, p: usize, y: &SampledPath, value: f64) -> Result<()> {
        let bound = self.h.growth_constant() * (1.0 + y.sup_norm().powf(self.h.growth_p()));
        if value.abs() > bound * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::GrowthViolation { path: p, value, bound });
        }
        Ok(())
    }

    fn value_on(&self, k: usize, eta: &SampledPath, seed: u64, purpose: u64, p: usize) -> Result<f64> {
        let y = self.terminal(k, eta, seed, purpose, p as u64, false);
        let v = self.h.eval(&y);
        self.gate(p, &y, v)?;
        Ok(v)
    }

    pub fn u(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<MCEstimate> {
        let k = self.index(t, eta)?;
        self.u_at(k, eta, n_paths, seed, BROWNIAN)
    }

    fn u_at(&self, k: usize, eta: &SampledPath, n_paths: usize, seed: u64, purpose: u64) -> Result<MCEstimate> {
        if k == self.grid().n_steps() || self.sigma == 0.0 {
            let y = self.terminal(k, eta, seed, purpose, 0, false);
            return Ok(MCEstimate::exact(self.h.eval(&y), seed));
        }
        let vals: Vec<f64> = map_paths(n_paths, |p| self.value_on(k, eta, seed, purpose, p))
            .into_iter()
            .collect::<Result<_>>()?;
        Ok(MCEstimate { n_paths, ..MCEstimate::from_samples(&vals, seed) })
    }

    /// Per-path values `H(Y_T^{t,η})` in path order.
    pub fn u_samples(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
        let k = self.index(t, eta)?;
        map_paths(n_paths, |p| self.value_on(k, eta, seed, BROWNIAN, p)).into_iter().collect()
    }

    /// `⟨Du(t,η), g⟩` with its standard error from the per-path pairings.
    pub fn du_pair(&self, t: f64, eta: &SampledPath, g: &SampledPath, n_paths: usize, seed: u64) -> Result<MCEstimate> {
        let k = self.index(t, eta)?;
        let terms = self.collect(k, eta, n_paths, seed, false)?;
        let vals: Vec<f64> = terms.iter().map(|t| t.du.pair(g)).collect::<Result<_>>()?;
        Ok(scrub(MCEstimate::from_samples(&vals, seed), vals.len()))
    }

    fn path_terms(&self, k: usize, eta: &SampledPath, seed: u64, p: usize, with_forward: bool) -> Result<PathTerms> {
        let y = self.terminal(k, eta, seed, BROWNIAN, p as u64, false);
        let h = self.h.eval(&y);
        self.gate(p, &y, h)?;
        let du = PathMeasure::absolutely_continuous(self.h.d1(&y)).pullback_flow(k);
        let atom00 = self.h.d2(&y).mass_on_square(k);
        let forward = if with_forward { self.forward_term(k, eta, &du)? } else { 0.0 };
        Ok(PathTerms { h, du, atom00, forward })
    }

    /// `∫_{]-t,0]} D^{ac} d⁻η`, zero on the empty interval at `t = 0`.
    fn forward_term(&self, k: usize, eta: &SampledPath, du: &PathMeasure) -> Result<f64> {
        let grid = self.grid();
        match du.density() {
            Some(d) if k > 0 => {
                let mu = PathMeasure::absolutely_continuous(d.clone());
                let iv = IntervalSpec::open(-grid.time(k), 0.0)?;
                Ok(forward_integral(&mu, &BvFunction::new(eta.clone(), false), iv)?.value)
            }
            _ => Ok(0.0),
        }
    }

    fn collect(&self, k: usize, eta: &SampledPath, n_paths: usize, seed: u64, with_forward: bool) -> Result<Vec<PathTerms>> {
        let n = if k == self.grid().n_steps() || self.sigma == 0.0 { 1 } else { n_paths };
        map_paths(n, |p| self.path_terms(k, eta, seed, p, with_forward))
            .into_iter()
            .collect()
    }

    fn mean_measure(&self, terms: &[PathTerms], seed: u64) -> Result<DuEstimate> {
        let grid = self.grid();
        let n = terms.len();
        let w = 1.0 / n as f64;
        let atoms: Vec<f64> = terms.iter().map(|t| t.du.atom0()).collect();
        let mut density: Option<Density> = None;
        for t in terms {
            if let Some(d) = t.du.density() {
                match &mut density {
                    Some(acc) => acc.add_scaled(d, w)?,
                    None => density = Some(d.scaled(w)),
                }
            }
        }
        let nodes = grid.n_nodes();
        let density_se = (0..nodes)
            .map(|j| {
                let xs: Vec<f64> = terms
                    .iter()
                    .map(|t| t.du.density().map_or(0.0, |d| d.values()[j]))
                    .collect();
                MCEstimate::from_samples(&xs, seed).std_error
            })
            .collect();
        let atom0 = scrub(MCEstimate::from_samples(&atoms, seed), n);
        let measure = PathMeasure::new(grid, atom0.value, Vec::new(), density)?;
        Ok(DuEstimate { measure, atom0, density_se })
    }

    pub fn du(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<DuEstimate> {
        let k = self.index(t, eta)?;
        let terms = self.collect(k, eta, n_paths, seed, false)?;
        self.mean_measure(&terms, seed)
    }

    /// `D^{δ₀}u(t,η)` by antithetic pairs on the inner stream family `(seed, INNER)`.
    pub fn du_atom0_antithetic(&self, k: usize, eta: &SampledPath, n_pairs: usize, seed: u64) -> f64 {
        if k == self.grid().n_steps() || self.sigma == 0.0 {
            let d = PathMeasure::absolutely_continuous(self.h.d1(eta)).pullback_flow(k);
            return d.atom0();
        }
        let mut acc = 0.0;
        for p in 0..n_pairs {
            for negate in [false, true] {
                let y = self.terminal(k, eta, seed, INNER, p as u64, negate);
                acc += self.h.d1(&y).integral_from(k);
            }
        }
        acc / (2 * n_pairs) as f64
    }

    pub fn d2u(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<D2uEstimate> {
        let k = self.index(t, eta)?;
        let n = if k == self.grid().n_steps() || self.sigma == 0.0 { 1 } else { n_paths };
        let per_path: Vec<Kernel2> = map_paths(n, |p| {
            let y = self.terminal(k, eta, seed, BROWNIAN, p as u64, false);
            self.h.d2(&y).pullback_flow(k)
        });
        let mut kernel = Kernel2::zero(self.grid());
        for d in &per_path {
            kernel.accumulate(d, 1.0 / n as f64)?;
        }
        let atoms: Vec<f64> = per_path.iter().map(|d| d.atom00).collect();
        Ok(D2uEstimate { kernel, atom00: scrub(MCEstimate::from_samples(&atoms, seed), n) })
    }

    pub fn dtu(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<MCEstimate> {
        Ok(self.evaluate(t, eta, n_paths, seed)?.dtu)
    }

    pub fn residual(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<MCEstimate> {
        Ok(self.evaluate(t, eta, n_paths, seed)?.residual)
    }

    /// `u`, `Du`, `D²u({0,0})`, `∂_t u` and the residual
    /// `∂_t u + ∫_{]-t,0]} D^{ac}u d⁻η + ½σ² D²u({0,0})` on one path set.
    pub fn evaluate(&self, t: f64, eta: &SampledPath, n_paths: usize, seed: u64) -> Result<SmoothEstimates> {
        let k = self.index(t, eta)?;
        let terms = self.collect(k, eta, n_paths, seed, true)?;
        let n = terms.len();
        let half_s2 = 0.5 * self.sigma * self.sigma;
        let hs: Vec<f64> = terms.iter().map(|t| t.h).collect();
        let a00: Vec<f64> = terms.iter().map(|t| t.atom00).collect();
        let dts: Vec<f64> = terms.iter().map(|t| -(t.forward + half_s2 * t.atom00)).collect();
        let res: Vec<f64> = terms
            .iter()
            .zip(&dts)
            .map(|(t, d)| d + t.forward + half_s2 * t.atom00)
            .collect();
        let du = self.mean_measure(&terms, seed)?;
        let u = scrub(MCEstimate::from_samples(&hs, seed), n);
        let atom00 = scrub(MCEstimate::from_samples(&a00, seed), n);
        let dtu = scrub(MCEstimate::from_samples(&dts, seed), n);
        let forward = self.forward_term(k, eta, &du.measure)?;
        let residual = MCEstimate {
            value: dtu.value + forward + half_s2 * atom00.value,
            ..scrub(MCEstimate::from_samples(&res, seed), n)
        };
        Ok(SmoothEstimates { u, du, atom00, dtu, residual })
    }

    /// `E[u(t, σW_t(·))] - u(0, 0)` with nested estimates: `n_outer` windows of
    /// the driver, each valued with `n_inner` inner paths. The reference is the
    /// `t = 0` row of the same estimator.
    pub fn martingale_check(&self, times: &[f64], n_outer: usize, n_inner: usize, seed: u64) -> Result<Vec<MartingaleRow>> {
        let grid = self.grid();
        let mut ks = vec![0];
        for &t in times {
            ks.push(grid.time_index(t)?);
        }
        let rows: Vec<MCEstimate> = ks
            .iter()
            .enumerate()
            .map(|(r, &k)| {
                let row_seed = derive_seed(seed, 1 + r as u64);
                let vals: Vec<f64> = map_paths(n_outer, |p| {
                    let w = crate::flow::brownian_on(grid, seed, p as u64);
                    let window = w.window_at(k).scaled(self.sigma);
                    self.u_at(k, &window, n_inner, derive_seed(row_seed, p as u64), INNER)
                        .map(|e| e.value)
                })
                .into_iter()
                .collect::<Result<_>>()?;
                Ok(MCEstimate::from_samples(&vals, seed))
            })
            .collect::<Result<_>>()?;
        let reference = rows[0];
        Ok(ks
            .iter()
            .zip(&rows)
            .enumerate()
            .map(|(i, (&k, e))| {
                let (deviation, se) = if i == 0 {
                    (0.0, 0.0)
                } else {
                    (e.value - reference.value, combined_se(e.std_error, reference.std_error))
                };
                MartingaleRow { t: grid.time(k), mean: e.value, std_error: e.std_error, deviation, combined_se: se }
            })
            .collect())
    }

    /// Probe-based check of the growth hypotheses and of the symmetry of `D²H`:
    /// 32 random paths, each scaled by 0.5, 1, 2, 4 and 8.
    pub fn probe_diagnostics(&self, seed: u64) -> ProbeReport {
        let grid = self.grid();
        let h = grid.step();
        let n = grid.n_steps();
        let probe = |i: u64| {
            let mut s = NormalStream::new(seed, 0x50, i);
            let mut acc = s.normal();
            let mut v = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                v.push(acc);
                acc += h.sqrt() * s.normal();
            }
            SampledPath::new(grid, v).expect("sized")
        };
        let mut max_h1 = 0.0_f64;
        let mut max_growth = 0.0_f64;
        let mut max_asym = 0.0_f64;
        let n_probes = 32;
        for i in 0..n_probes {
            let base = probe(i as u64);
            let other = probe(1000 + i as u64);
            for scale in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let eta = base.scaled(scale);
                let sup = eta.sup_norm();
                let d = self.h.d1(&eta);
                let dv = d.values();
                let dd = d.derivative().unwrap_or(dv);
                let h1 = (product_integral(h, dv, dv, 0, n) + product_integral(h, dd, dd, 0, n)).sqrt();
                let bound = self.h.h1_bound(sup);
                max_h1 = max_h1.max(if bound > 0.0 { h1 / bound } else if h1 > 0.0 { f64::INFINITY } else { 0.0 });
                let gb = self.h.growth_constant() * (1.0 + sup.powf(self.h.growth_p()));
                let v = self.h.eval(&eta).abs();
                max_growth = max_growth.max(if gb > 0.0 { v / gb } else if v > 0.0 { f64::INFINITY } else { 0.0 });
                let asym = self.h.d2(&eta).asymmetry(&base, &other).unwrap_or(f64::INFINITY);
                max_asym = max_asym.max(asym);
            }
        }
        ProbeReport {
            n_probes,
            max_h1_ratio: max_h1,
            max_growth_ratio: max_growth,
            max_asymmetry: max_asym,
            pass: max_h1 <= 1.0 + 1e-9 && max_growth <= 1.0 + 1e-9 && max_asym <= 1e-10,
        }
    }
}

/// `from_samples` with the path count fixed to the number actually drawn.
fn scrub(e: MCEstimate, n: usize) -> MCEstimate {
    MCEstimate { n_paths: n, ..e }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(b: Builtin, n: usize) -> SmoothSolver<PolyFunctional> {
        SmoothSolver::new(b.compile(Grid::new(1.0, n).unwrap()), 1.0).unwrap()
    }

    #[test]
    fn terminal_time_is_exact() {
        let s = solver(Builtin::square_of_integral(), 16);
        let eta = SampledPath::from_fn(s.grid(), |x| x + 1.0);
        let e = s.u(1.0, &eta, 100, 1).unwrap();
        assert_eq!(e.std_error, 0.0);
        assert!((e.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quadratic_kernel_blocks() {
        let s = solver(Builtin::square_of_integral(), 32);
        let grid = s.grid();
        let t = 0.25;
        let d2 = s.d2u(t, &SampledPath::zero(grid), 50, 3).unwrap();
        assert!((d2.atom00.value - 2.0 * 0.75_f64.powi(2)).abs() < 1e-12);
        assert!(d2.atom00.std_error < 1e-14);
        let cross = d2.kernel.cross_x.as_ref().unwrap();
        assert!((cross.values()[32] - 1.5).abs() < 1e-12);
        assert!((d2.kernel.pair(&SampledPath::constant(grid, 1.0), &SampledPath::constant(grid, 1.0)).unwrap()
            - (2.0 * 0.25 * 0.25 + 2.0 * 2.0 * 0.75 * 0.25 + 2.0 * 0.75 * 0.75))
            .abs()
            < 1e-12);
    }

    #[test]
    fn linear_has_zero_second_derivative() {
        let s = solver(Builtin::Linear { g: Basis::Sin { amp: 1.0, freq: 2.0, phase: 0.0 } }, 16);
        let d2 = s.d2u(0.5, &SampledPath::zero(s.grid()), 10, 1).unwrap();
        assert!(d2.kernel.is_zero());
        let du = s.du(0.5, &SampledPath::zero(s.grid()), 10, 1).unwrap();
        assert!(du.atom0.std_error < 1e-14);
    }

    #[test]
    fn probes_pass_for_builtins() {
        for b in [
            Builtin::square_of_integral(),
            Builtin::Cubic { g: Basis::Exp { scale: 1.0, rate: 0.5 } },
            Builtin::Product { g1: Basis::Constant { value: 1.0 }, g2: Basis::Polynomial { coeffs: vec![0.0, 1.0] } },
        ] {
            let r = solver(b, 32).probe_diagnostics(4);
            assert!(r.pass, "{r:?}");
        }
    }
}
