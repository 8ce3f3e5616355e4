//! Deterministic forward integrals `∫ μ d⁻f` via regularization.
//!
//! The ε-approximant `∫ (f(x+ε) - f(x))/ε μ(dx)` is integrated exactly for the
//! piecewise-linear model of `f` and of the density of `μ`: the integration
//! range is split at every kink of either factor and Simpson's rule is exact on
//! each piece. Closed forms are evaluated on the same model, so both routes
//! agree up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{EpsRow, Error, Result};
use crate::path::{cell_product, Density, Grid, PathMeasure, SampledPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    /// `]a,b]`
    Open,
    /// `[a,b]`
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub a: f64,
    pub b: f64,
    pub mode: Mode,
}

impl IntervalSpec {
    pub fn new(a: f64, b: f64, mode: Mode) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::Domain(format!("interval needs a <= b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b, mode })
    }

    pub fn open(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, Mode::Open)
    }

    pub fn closed(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, Mode::Closed)
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let t = grid.horizon();
        let tol = 1e-12 * t;
        if self.a < -t - tol || self.b > tol || self.a > self.b {
            return Err(Error::Domain(format!(
                "interval [{}, {}] not inside [-{t}, 0]",
                self.a, self.b
            )));
        }
        Ok(())
    }

    fn contains(&self, x: f64) -> bool {
        match self.mode {
            Mode::Open => self.a < x && x <= self.b,
            Mode::Closed => self.a <= x && x <= self.b,
        }
    }
}

/// Integrator function on `[-T,0]` with a declared bounded-variation flag.
#[derive(Clone, Debug, PartialEq)]
pub struct BvFunction {
    path: SampledPath,
    is_bv: bool,
    derivative: Option<Vec<f64>>,
}

impl BvFunction {
    pub fn new(path: SampledPath, is_bv: bool) -> Self {
        Self { path, is_bv, derivative: None }
    }

    pub fn bv(path: SampledPath) -> Self {
        Self::new(path, true)
    }

    /// Attach analytic derivative samples used by Stieltjes integrals against `df`.
    pub fn with_derivative(mut self, derivative: Vec<f64>) -> Result<Self> {
        if derivative.len() != self.path.grid().n_nodes() {
            return Err(Error::Invalid("derivative sample count mismatch".into()));
        }
        self.derivative = Some(derivative);
        Ok(self)
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn is_bv(&self) -> bool {
        self.is_bv
    }

    pub fn derivative(&self) -> Option<&[f64]> {
        self.derivative.as_deref()
    }

    pub fn total_variation(&self) -> f64 {
        self.path.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

/// `f` restricted to `[a,b]` and extended to the real line.
#[derive(Clone, Copy, Debug)]
pub struct Extended<'a> {
    f: &'a BvFunction,
    iv: IntervalSpec,
}

pub fn extend(f: &BvFunction, iv: IntervalSpec) -> Extended<'_> {
    Extended { f, iv }
}

impl Extended<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        let p = Pl::of_path(&self.f.path);
        if x > self.iv.b {
            p.eval(self.iv.b)
        } else if x < self.iv.a {
            match self.iv.mode {
                Mode::Open => p.eval(self.iv.a),
                Mode::Closed => 0.0,
            }
        } else {
            p.eval(x)
        }
    }
}

/// Fast linear interpolation of node samples, extrapolating linearly past the ends.
#[derive(Clone, Copy)]
struct Pl<'a> {
    values: &'a [f64],
    horizon: f64,
    step: f64,
    lo: usize,
}

impl<'a> Pl<'a> {
    fn of_path(p: &'a SampledPath) -> Self {
        Self::new(p.grid(), p.values(), 0)
    }

    fn new(grid: Grid, values: &'a [f64], lo: usize) -> Self {
        Self { values, horizon: grid.horizon(), step: grid.step(), lo }
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let n = self.values.len() - 1;
        let pos = (x + self.horizon) / self.step;
        let k = (pos.floor().max(0.0) as usize).clamp(self.lo, n - 1);
        (k, pos - k as f64)
    }

    fn eval(&self, x: f64) -> f64 {
        let (k, w) = self.cell(x);
        if w == 0.0 {
            self.values[k]
        } else {
            (1.0 - w) * self.values[k] + w * self.values[k + 1]
        }
    }

    fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / self.step
    }
}

/// Slope changes of `f` extended past `b`: positions, slope to the right of each.
struct Kinks {
    pos: Vec<f64>,
    right: Vec<f64>,
    delta: Vec<f64>,
    first: f64,
}

impl Kinks {
    fn new(f: &Pl, grid: &Grid, a: f64, b: f64) -> Self {
        let (ka, _) = f.cell(a);
        let first = if a < b { f.slope(ka) } else { 0.0 };
        let mut pos = Vec::new();
        let mut right = Vec::new();
        let mut delta = Vec::new();
        let mut prev = first;
        for j in 0..=grid.n_steps() {
            let x = grid.x(j);
            if x > a && x < b && j < grid.n_steps() {
                let s = f.slope(j);
                pos.push(x);
                right.push(s);
                delta.push(s - prev);
                prev = s;
            }
        }
        if a < b {
            pos.push(b);
            right.push(0.0);
            delta.push(-prev);
        }
        Self { pos, right, delta, first }
    }

    /// Slope of the extended `f` just right of `x`.
    fn slope_at(&self, x: f64) -> f64 {
        let i = self.pos.partition_point(|&p| p <= x);
        if i == 0 {
            self.first
        } else {
            self.right[i - 1]
        }
    }
}

/// `(f_ext(x+ε) - f(x)) / ε` for `x ∈ [a,b]`.
fn diff_quotient(f: &Pl, kinks: &Kinks, b: f64, x: f64, eps: f64) -> f64 {
    let lo = kinks.pos.partition_point(|&p| p <= x);
    let hi = kinks.pos.partition_point(|&p| p < x + eps);
    if hi - lo > 2 {
        return (f.eval((x + eps).min(b)) - f.eval(x)) / eps;
    }
    let mut d = kinks.slope_at(x);
    for i in lo..hi {
        d += kinks.delta[i] * (x + eps - kinks.pos[i]) / eps;
    }
    d
}

/// `∫_l^r f_ext` for the open/right extension (constant `f(b)` beyond `b`).
fn integral_ext(f: &Pl, grid: &Grid, b: f64, l: f64, r: f64) -> f64 {
    let mut acc = 0.0;
    let mut x = l;
    let inner_end = r.min(b);
    let mut nodes = (0..=grid.n_steps()).map(|j| grid.x(j)).filter(|&p| p > l && p < inner_end);
    loop {
        let next = nodes.next().unwrap_or(inner_end);
        if next > x {
            acc += 0.5 * (next - x) * (f.eval(x) + f.eval(next));
            x = next;
        }
        if next >= inner_end {
            break;
        }
    }
    if r > b {
        acc += (r - b.max(l)) * f.eval(b);
    }
    acc
}

fn density_lower(d: &Density, a: f64) -> f64 {
    a.max(d.grid().x(d.start()))
}

/// `I⁻(iv, f, ε)`.
pub fn forward_integral_eps(mu: &PathMeasure, f: &BvFunction, iv: IntervalSpec, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    let grid = mu.grid();
    grid.check_same(&f.path.grid())?;
    iv.check(&grid)?;
    let (a, b) = (iv.a, iv.b);
    let fp = Pl::of_path(&f.path);
    let kinks = Kinks::new(&fp, &grid, a, b);
    let mut acc = 0.0;

    for atom in mu.atoms() {
        if iv.contains(atom.x) && atom.weight != 0.0 {
            acc += atom.weight * diff_quotient(&fp, &kinks, b, atom.x, eps);
        }
    }
    // the δ₀ atom sees a zero increment: f_ext is constant right of b = 0

    if let Some(d) = mu.density() {
        let dens = Pl::new(grid, d.values(), d.start().min(grid.n_steps() - 1));
        let lo = density_lower(d, a);
        if lo < b {
            let mut cuts = vec![lo, b];
            for j in 0..=grid.n_steps() {
                let x = grid.x(j);
                if x > lo && x < b {
                    cuts.push(x);
                }
            }
            for &p in &kinks.pos {
                let x = p - eps;
                if x > lo && x < b {
                    cuts.push(x);
                }
            }
            cuts.sort_by(|u, v| u.total_cmp(v));
            cuts.dedup();
            let integrand = |x: f64| diff_quotient(&fp, &kinks, b, x, eps) * dens.eval(x);
            let mut left = integrand(cuts[0]);
            for w in cuts.windows(2) {
                let (l, r) = (w[0], w[1]);
                let right = integrand(r);
                acc += (r - l) / 6.0 * (left + 4.0 * integrand(0.5 * (l + r)) + right);
                left = right;
            }
        }
        if iv.mode == Mode::Closed {
            let mu_a = if a < grid.x(d.start()) { 0.0 } else { dens.eval(a) };
            if mu_a != 0.0 {
                acc += mu_a * integral_ext(&fp, &grid, b, a, a + eps) / eps;
            }
        }
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    ClosedForm,
    EpsLimit,
}

/// Which closed form produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `∫ μ(x-) df`
    Stieltjes,
    /// `μ(b)f(b) - ∫_{]a,b]} f dμ`
    ClosedBoundary,
    /// `μ(b)f(b) - μ(a)f(a) - ∫_a^b f dμ`
    OpenBoundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardIntegral {
    pub value: f64,
    pub method: Method,
    pub formula: Option<Formula>,
    pub error_estimate: f64,
    pub eps_table: Vec<EpsRow>,
}

/// Exponents `k` of the regularization sequence `ε_k = 2^{-k}`.
pub const EPS_EXPONENTS: std::ops::RangeInclusive<i32> = 4..=12;

/// `∫_{]a,b]} μ df` with `μ(x-) = μ(x)` on the continuous support.
fn stieltjes_mu_df(d: &Density, f: &BvFunction, a: f64, b: f64) -> f64 {
    let grid = d.grid();
    let lo = density_lower(d, a);
    if lo >= b {
        return 0.0;
    }
    let dens = Pl::new(grid, d.values(), d.start().min(grid.n_steps() - 1));
    let fp = Pl::of_path(&f.path);
    let df = f.derivative.as_deref().map(|v| Pl::new(grid, v, 0));
    over_cells(&grid, lo, b, |l, r| match &df {
        Some(df) => cell_product(r - l, dens.eval(l), dens.eval(r), df.eval(l), df.eval(r)),
        None => (fp.eval(r) - fp.eval(l)) * 0.5 * (dens.eval(l) + dens.eval(r)),
    })
}

/// `∫_{]a,b]} f dμ` including the jump of `μ` at its support start.
fn stieltjes_f_dmu(d: &Density, f: &BvFunction, a: f64, b: f64) -> f64 {
    let grid = d.grid();
    let xs = grid.x(d.start());
    let fp = Pl::of_path(&f.path);
    let mut acc = 0.0;
    if d.start() > 0 && xs > a && xs <= b {
        acc += fp.eval(xs) * d.values()[d.start()];
    }
    let lo = a.max(xs);
    if lo >= b {
        return acc;
    }
    let dens = Pl::new(grid, d.values(), d.start().min(grid.n_steps() - 1));
    let dmu = d.derivative().map(|v| Pl::new(grid, v, 0));
    acc + over_cells(&grid, lo, b, |l, r| match &dmu {
        Some(dm) => cell_product(r - l, fp.eval(l), fp.eval(r), dm.eval(l), dm.eval(r)),
        None => (dens.eval(r) - dens.eval(l)) * 0.5 * (fp.eval(l) + fp.eval(r)),
    })
}

/// Sum of `piece(l, r)` over the grid cells clipped to `[lo, hi]`.
fn over_cells(grid: &Grid, lo: f64, hi: f64, mut piece: impl FnMut(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut x = lo;
    for j in 0..=grid.n_steps() {
        let p = grid.x(j);
        if p > x && p < hi {
            acc += piece(x, p);
            x = p;
        }
    }
    if hi > x {
        acc += piece(x, hi);
    }
    acc
}

fn density_value(d: &Density, x: f64) -> f64 {
    let grid = d.grid();
    if x < grid.x(d.start()) {
        0.0
    } else {
        Pl::new(grid, d.values(), d.start().min(grid.n_steps() - 1)).eval(x)
    }
}

/// Closed-form value for an absolutely continuous `μ`, if one applies.
pub fn forward_integral_closed_form(
    mu: &PathMeasure,
    f: &BvFunction,
    iv: IntervalSpec,
) -> Result<Option<(f64, Formula)>> {
    let grid = mu.grid();
    grid.check_same(&f.path.grid())?;
    iv.check(&grid)?;
    if !mu.is_absolutely_continuous() {
        return Ok(None);
    }
    let zero;
    let d = match mu.density() {
        Some(d) => d,
        None => {
            zero = Density::constant(grid, 0.0);
            &zero
        }
    };
    let fp = Pl::of_path(&f.path);
    let (a, b) = (iv.a, iv.b);
    let boundary_b = density_value(d, b) * fp.eval(b);
    Ok(Some(match iv.mode {
        Mode::Open if f.is_bv => (stieltjes_mu_df(d, f, a, b), Formula::Stieltjes),
        Mode::Open => (
            boundary_b - density_value(d, a) * fp.eval(a) - stieltjes_f_dmu(d, f, a, b),
            Formula::OpenBoundary,
        ),
        Mode::Closed => (boundary_b - stieltjes_f_dmu(d, f, a, b), Formula::ClosedBoundary),
    }))
}

/// The sequence `EPS_EXPONENTS`, extended until the last [`SLOPE_ROWS`] `ε` lie below
/// every distance between a breakpoint (`a`, `b`, atoms) and a grid node, where
/// `I(ε)` is an exact quadratic in `ε`.
fn eps_exponents(mu: &PathMeasure, iv: IntervalSpec) -> std::ops::RangeInclusive<i32> {
    let grid = mu.grid();
    let h = grid.step();
    let mut d_min = iv.b - iv.a;
    let points = [iv.a, iv.b].into_iter().chain(mu.atoms().iter().map(|a| a.x));
    for x in points {
        let r = (x + grid.horizon()) / h;
        let d = (r - r.round()).abs() * h;
        if d > 1e-12 * h {
            d_min = d_min.min(d);
        }
    }
    let (lo, hi) = (*EPS_EXPONENTS.start(), *EPS_EXPONENTS.end());
    let mut k = hi;
    let back = SLOPE_ROWS as i32 - 1;
    while (-(k - back) as f64).exp2() >= d_min && k < hi + 30 {
        k += 1;
    }
    lo..=k
}

/// Smallest `ε = 2^{-k}` the sequence may reach.
const MAX_EPS_EXPONENT: i32 = 20;

/// Whether the last [`SLOPE_ROWS`] rows converge at least at first order:
/// every local rate `log₂(Δ_j / Δ_{j+1})` of successive differences is at
/// least 0.95, or the differences are at roundoff level.
fn settled(table: &[EpsRow]) -> bool {
    if table.len() < SLOPE_ROWS {
        return false;
    }
    let rows = &table[table.len() - SLOPE_ROWS..];
    let scale = rows.iter().fold(0.0_f64, |s, r| s.max(r.1.abs()));
    let diffs: Vec<f64> = rows.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    if diffs[diffs.len() - 1] <= 1e-12 * (1.0 + scale) {
        return true;
    }
    diffs.windows(2).all(|w| w[1] > 0.0 && (w[0] / w[1]).log2() >= 0.95)
}

/// Cauchy test on the tail: the last three differences grow and are not at roundoff level.
fn diverging(table: &[EpsRow]) -> bool {
    let m = table.len();
    let (i0, i1, i2) = (table[m - 3].1, table[m - 2].1, table[m - 1].1);
    let value = (4.0 * (2.0 * i2 - i1) - (2.0 * i1 - i0)) / 3.0;
    let diffs: Vec<f64> = table.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let tail = &diffs[diffs.len() - 3..];
    tail.windows(2).all(|w| w[1] >= w[0]) && tail[2] > 1e-12 * (1.0 + value.abs())
}

/// ε-limit with Richardson extrapolation over the last three terms of the sequence.
pub fn forward_integral_eps_limit(mu: &PathMeasure, f: &BvFunction, iv: IntervalSpec) -> Result<ForwardIntegral> {
    let mut table = Vec::new();
    let exps = eps_exponents(mu, iv);
    let mut k = *exps.end();
    for k in exps {
        let eps = (-k as f64).exp2();
        table.push((eps, forward_integral_eps(mu, f, iv, eps)?));
    }
    while k < MAX_EPS_EXPONENT && !settled(&table) && !diverging(&table) {
        k += 1;
        let eps = (-k as f64).exp2();
        table.push((eps, forward_integral_eps(mu, f, iv, eps)?));
    }
    let m = table.len();
    let (i0, i1, i2) = (table[m - 3].1, table[m - 2].1, table[m - 1].1);
    let r1a = 2.0 * i1 - i0;
    let r1b = 2.0 * i2 - i1;
    let value = (4.0 * r1b - r1a) / 3.0;

    if diverging(&table) {
        return Err(Error::NonConvergent { table });
    }

    let i_prev = table[m - 4].1;
    let previous = (4.0 * r1a - (2.0 * i0 - i_prev)) / 3.0;
    let scale = table.iter().fold(0.0_f64, |s, r| s.max(r.1.abs()));
    let spread = (value - r1b).abs().max((value - previous).abs());
    let floor = 1e-13 * (1.0 + value.abs() + scale);
    Ok(ForwardIntegral {
        value,
        method: Method::EpsLimit,
        formula: None,
        error_estimate: spread + floor,
        eps_table: table,
    })
}

/// `∫_iv μ d⁻f`: a closed form when `μ` is absolutely continuous, the ε-limit otherwise.
pub fn forward_integral(mu: &PathMeasure, f: &BvFunction, iv: IntervalSpec) -> Result<ForwardIntegral> {
    match forward_integral_closed_form(mu, f, iv)? {
        Some((value, formula)) => Ok(ForwardIntegral {
            value,
            method: Method::ClosedForm,
            formula: Some(formula),
            error_estimate: 0.0,
            eps_table: Vec::new(),
        }),
        None => forward_integral_eps_limit(mu, f, iv),
    }
}

/// Rows of the table used by [`convergence_slope`].
pub const SLOPE_ROWS: usize = 5;

/// Least-squares slope of `log|I(ε) - limit|` against `log ε` over the
/// [`SLOPE_ROWS`] smallest `ε`.
pub fn convergence_slope(table: &[EpsRow], limit: f64) -> f64 {
    let pts: Vec<(f64, f64)> = table[table.len().saturating_sub(SLOPE_ROWS)..]
        .iter()
        .filter(|r| r.1 != limit)
        .map(|r| (r.0.ln(), (r.1 - limit).abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
