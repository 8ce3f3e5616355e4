//! Check suites. Each suite turns its parameters into checks and tables;
//! module errors become failed checks instead of aborting the run.

use std::path::Path;

use pathheat_core::clark_ocone::{representation_check, DriverKind, DriverSpec};
use pathheat_core::cylindrical::{CylSolver, CylindricalSpec};
use pathheat_core::flow::{
    check_continuity, check_flow_property, check_flow_property_markovian, check_time_homogeneity, growth_bound,
    markovian_strong_deviation, sample_brownian, FlowParams, LinearCoefficients,
};
use pathheat_core::path::{Density, Grid, PathMeasure, SampledPath};
use pathheat_core::regcalc::{
    convergence_slope, forward_integral, forward_integral_eps_limit, BvFunction, IntervalSpec, Mode,
};
use pathheat_core::rng::derive_seed;
use pathheat_core::smooth::{Builtin, SmoothSolver};
use pathheat_core::stats::{combined_se, map_paths, MCEstimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::config::{
    rough_path, AllParams, ClarkOconeParams, CylindricalParams, FlowCheckParams, IntegrateParams, Params, SmoothParams,
};
use crate::error::CliError;
use crate::report::{cell, Check, Table};

/// Everything a suite produces besides the report envelope.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Extra JSON documents `(file name, contents)`.
    pub documents: Vec<(String, String)>,
    pub grid_sizes: Vec<usize>,
}

impl Outcome {
    fn absorb(&mut self, prefix: &str, other: Outcome) {
        self.checks.extend(other.checks.into_iter().map(|c| c.prefixed(prefix)));
        self.tables.extend(other.tables);
        self.documents.extend(other.documents);
        self.grid_sizes.extend(other.grid_sizes);
    }

    /// Run `f`, turning an error into one failed check named `name`.
    fn guard(&mut self, name: &str, reference: &str, f: impl FnOnce(&mut Outcome) -> Result<(), CliError>) {
        let mut local = Outcome::default();
        match f(&mut local) {
            Ok(()) => {
                self.checks.extend(local.checks);
                self.tables.extend(local.tables);
                self.documents.extend(local.documents);
                self.grid_sizes.extend(local.grid_sizes);
            }
            Err(e) => self.checks.push(Check::failed(name, reference, e)),
        }
    }
}

/// Run the suite selected by `params`. `base` resolves relative file names.
pub fn run_suite(params: &Params, seed: u64, base: &Path) -> Outcome {
    match params {
        Params::Integrate(p) => integrate(p, seed, base),
        Params::Cylindrical(p) => cylindrical(p, seed),
        Params::FlowCheck(p) => flow_check(p, seed, base),
        Params::Smooth(p) => smooth(p, seed, base),
        Params::ClarkOcone(p) => clark_ocone(p, seed),
        Params::All(p) => all(p, seed, base),
    }
}

fn all(p: &AllParams, seed: u64, base: &Path) -> Outcome {
    let mut out = Outcome::default();
    out.absorb("integrate", integrate(&p.integrate, seed, base));
    out.absorb("cylindrical", cylindrical(&p.cylindrical, seed));
    out.absorb("flow-check", flow_check(&p.flow_check, seed, base));
    out.absorb("smooth", smooth(&p.smooth, seed, base));
    out.absorb("clark-ocone", clark_ocone(&p.clark_ocone, seed));
    out
}

fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

fn poly(rng: &mut ChaCha8Rng, max_degree: usize) -> Vec<f64> {
    let degree = rng.random_range(1..=max_degree.max(1));
    (0..=degree).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Random polynomial density and integrand on a random subinterval of `[-T,0]`.
fn random_case(rng: &mut ChaCha8Rng, grid: Grid, max_degree: usize) -> (PathMeasure, SampledPath, f64, f64) {
    let t = grid.horizon();
    let mu_c = poly(rng, max_degree);
    let f_c = poly(rng, max_degree);
    let mut a: f64 = rng.random_range(-t..-0.05 * t);
    let mut b: f64 = rng.random_range(-t..0.0);
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    if b - a < 0.05 * t {
        b = (a + 0.05 * t).min(0.0);
    }
    let mu = PathMeasure::absolutely_continuous(Density::from_fn(grid, |x| horner(&mu_c, x)));
    let f = SampledPath::from_fn(grid, |x| horner(&f_c, x));
    (mu, f, a, b)
}

#[derive(Serialize)]
struct IntegralRecord {
    name: String,
    value: f64,
    method: pathheat_core::regcalc::Method,
    formula: Option<pathheat_core::regcalc::Formula>,
    eps_table: Vec<(f64, f64)>,
}

fn integrate(p: &IntegrateParams, seed: u64, base: &Path) -> Outcome {
    let mut out = Outcome::default();
    out.grid_sizes.push(p.n_steps);
    out.guard("closed_vs_eps_limit", "closed forms equal the regularization limit", |o| {
        let grid = Grid::new(p.horizon, p.n_steps)?;
        let mut rng = rng_for(seed, 1);
        let mut table = Table::new(
            "integrate_cases.csv",
            &["case", "formula", "a", "b", "closed_form", "eps_limit", "spread", "slope"],
        );
        let mut worst = 0.0_f64;
        let mut min_slope = f64::INFINITY;
        for i in 0..p.cases {
            let (mu, f, a, b) = random_case(&mut rng, grid, p.max_degree);
            for (mode, bv) in [(Mode::Open, true), (Mode::Open, false), (Mode::Closed, true)] {
                let iv = IntervalSpec::new(a, b, mode)?;
                let f = BvFunction::new(f.clone(), bv);
                let cf = forward_integral(&mu, &f, iv)?;
                let el = forward_integral_eps_limit(&mu, &f, iv)?;
                let r = ratio((cf.value - el.value).abs(), el.error_estimate);
                let slope = convergence_slope(&el.eps_table, cf.value);
                worst = worst.max(r);
                min_slope = min_slope.min(slope);
                let formula = cf.formula.map_or("none".to_string(), |f| format!("{f:?}"));
                table.push(vec![
                    cell(i),
                    formula,
                    cell(a),
                    cell(b),
                    cell(cf.value),
                    cell(el.value),
                    cell(el.error_estimate),
                    cell(slope),
                ]);
            }
        }
        o.checks.push(Check::abs_le(
            "closed_vs_eps_limit",
            "closed forms equal the regularization limit (gap / spread)",
            worst,
            p.spread_factor,
        ));
        o.checks.push(Check::at_least("eps_slope", "first-order convergence in ε", min_slope, p.min_slope));
        o.tables.push(table);
        Ok(())
    });
    out.guard("closed_minus_open", "closed minus open integral is the left boundary term", |o| {
        let grid = Grid::new(p.horizon, p.n_steps)?;
        let mut rng = rng_for(seed, 2);
        let mut worst = 0.0_f64;
        for _ in 0..p.cases {
            let (mu, f, a, b) = random_case(&mut rng, grid, p.max_degree);
            let f = BvFunction::bv(f);
            let closed = forward_integral(&mu, &f, IntervalSpec::closed(a, b)?)?;
            let open = forward_integral(&mu, &f, IntervalSpec::open(a, b)?)?;
            let dens = mu.density().map_or(Ok(0.0), |d| d.eval(a))?;
            let expect = dens * f.path().eval(a)?;
            worst = worst.max((closed.value - open.value - expect).abs());
        }
        o.checks.push(Check::abs_le(
            "closed_minus_open",
            "closed minus open integral is the left boundary term",
            worst,
            p.boundary_tol,
        ));
        Ok(())
    });
    if !p.scenarios.is_empty() {
        out.guard("scenarios", "explicit forward integrals", |o| {
            let grid = Grid::new(p.horizon, p.n_steps)?;
            let mut records = Vec::new();
            for s in &p.scenarios {
                let density = s.mu.density.as_ref().map(|d| d.build(grid, base)).transpose()?;
                let mu = PathMeasure::new(grid, s.mu.atom0, s.mu.atoms.clone(), density.map(|d| Density::from_path(&d)))?;
                let f = BvFunction::new(s.f.build(grid, base)?, s.bv);
                let iv = IntervalSpec::new(s.interval[0], s.interval[1], s.mode)?;
                let v = forward_integral(&mu, &f, iv)?;
                let el = forward_integral_eps_limit(&mu, &f, iv)?;
                let gap = ratio((v.value - el.value).abs(), el.error_estimate);
                o.checks.push(Check::abs_le(
                    &format!("scenario/{}", s.name),
                    "reported value agrees with the regularization limit (gap / spread)",
                    gap,
                    p.spread_factor,
                ));
                records.push(IntegralRecord {
                    name: s.name.clone(),
                    value: v.value,
                    method: v.method,
                    formula: v.formula,
                    eps_table: el.eps_table,
                });
            }
            let text = serde_json::to_string_pretty(&records).map_err(|e| CliError::Io(e.to_string()))?;
            o.documents.push(("integrate.json".into(), text));
            Ok(())
        });
    }
    out
}

/// `y Φ(y/s) + s ϕ(y/s)`.
fn bachelier(y: f64, s: f64) -> f64 {
    let n = Normal::standard();
    if s == 0.0 {
        return y.max(0.0);
    }
    y * n.cdf(y / s) + s * n.pdf(y / s)
}

fn cylindrical(p: &CylindricalParams, seed: u64) -> Outcome {
    let mut out = Outcome::default();
    out.grid_sizes.extend([p.n_steps, p.bachelier.n_steps, p.martingale.n_steps]);
    let mut rng = rng_for(seed, 3);
    for case in &p.cases {
        let name = format!("residual/{}", case.label);
        let reference = "cylindrical solution solves the path-dependent heat equation";
        let point_seed = rng.random::<u64>();
        out.guard(&name, reference, |o| {
            let grid = Grid::new(p.horizon, p.n_steps)?;
            let sol = CylSolver::new(CylindricalSpec::new(grid, p.sigma, case.basis.clone(), case.payoff.clone())?)?;
            let mut r = ChaCha8Rng::seed_from_u64(point_seed);
            let k_max = (p.t_max_fraction * p.n_steps as f64).floor() as usize;
            let mut table = Table::new(&format!("cyl_residual_{}.csv", case.label), &["t", "residual"]);
            let mut worst = 0.0_f64;
            for i in 0..p.points {
                let k = r.random_range(0..=k_max);
                let eta = rough_path(grid, derive_seed(point_seed, i as u64), r.random_range(0.2..1.5));
                let res = sol.residual(grid.time(k), &eta)?;
                worst = worst.max(res.abs());
                table.push(vec![cell(grid.time(k)), cell(res)]);
            }
            o.checks.push(Check::abs_le(&name, reference, worst, case.tolerance));
            o.tables.push(table);
            Ok(())
        });
    }
    out.guard("features", "features equal closed forward integrals of the basis", |o| {
        let grid = Grid::new(p.horizon, p.n_steps)?;
        let mut r = rng_for(seed, 4);
        let mut worst = 0.0_f64;
        for case in 0..p.feature_cases {
            let basis = vec![
                pathheat_core::cylindrical::Basis::Polynomial { coeffs: (0..4).map(|_| r.random_range(-1.0..1.0)).collect() },
                pathheat_core::cylindrical::Basis::Sin {
                    amp: r.random_range(0.5..2.0),
                    freq: r.random_range(0.5..4.0),
                    phase: r.random_range(0.0..1.0),
                },
            ];
            let spec = CylindricalSpec::new(
                grid,
                p.sigma,
                basis,
                pathheat_core::cylindrical::Payoff::Linear { coeffs: vec![1.0, 1.0] },
            )?;
            let sol = CylSolver::new(spec)?;
            let eta = rough_path(grid, derive_seed(seed, 100 + case as u64), r.random_range(0.1..2.0));
            let t = grid.time(r.random_range(0..=p.n_steps));
            let a = sol.features(t, &eta)?;
            let b = sol.features_via_forward_integral(t, &eta, Mode::Closed)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        o.checks.push(Check::abs_le(
            "features",
            "features equal closed forward integrals of the basis",
            worst,
            p.feature_tol,
        ));
        Ok(())
    });
    out.guard("bachelier", "Bachelier call price", |o| {
        let b = &p.bachelier;
        let grid = Grid::new(p.horizon, b.n_steps)?;
        let spec = CylindricalSpec::new(
            grid,
            1.0,
            vec![pathheat_core::cylindrical::Basis::Constant { value: 1.0 }],
            pathheat_core::cylindrical::Payoff::Call { strike: 0.0 },
        )?;
        let sol = CylSolver::new(spec)?;
        let mut table = Table::new("bachelier.csv", &["t", "y", "u", "oracle", "error"]);
        let mut worst = 0.0_f64;
        let pts = b.points.max(2);
        for ti in 0..pts {
            let k = ti * b.n_steps / pts;
            let t = grid.time(k);
            for yi in 0..pts {
                let y = -b.y_range + 2.0 * b.y_range * yi as f64 / (pts - 1) as f64;
                let u = sol.u(t, &SampledPath::constant(grid, y))?;
                let oracle = bachelier(y, (p.horizon - t).sqrt());
                worst = worst.max((u - oracle).abs());
                table.push(vec![cell(t), cell(y), cell(u), cell(oracle), cell(u - oracle)]);
            }
        }
        o.checks.push(Check::abs_le("bachelier", "Bachelier call price", worst, b.tolerance));
        o.tables.push(table);
        Ok(())
    });
    out.guard("martingale", "u(t, σW_t) is a martingale", |o| {
        let m = &p.martingale;
        let grid = Grid::new(p.horizon, m.n_steps)?;
        let sol = CylSolver::new(CylindricalSpec::new(grid, p.sigma, m.basis.clone(), m.payoff.clone())?)?;
        let u0 = sol.u(0.0, &SampledPath::zero(grid))?;
        let fp = FlowParams::new(grid, p.sigma, derive_seed(seed, 5))?;
        let mut table = Table::new("martingale_cylindrical.csv", &["t", "mean", "u0", "std_error"]);
        for &t in &m.times {
            let k = grid.time_index(t)?;
            let vals: Vec<f64> = map_paths(m.n_paths, |i| {
                let w = sample_brownian(&fp, i as u64);
                sol.u_at(k, &w.window_at(k).scaled(p.sigma))
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
            let e = MCEstimate::from_samples(&vals, fp.seed);
            o.checks.push(Check::within_3se(
                &format!("martingale/t={t}"),
                "u(t, σW_t) is a martingale",
                e.value - u0,
                e.std_error,
            ));
            table.push(vec![cell(t), cell(e.value), cell(u0), cell(e.std_error)]);
        }
        o.tables.push(table);
        Ok(())
    });
    out
}

fn flow_check(p: &FlowCheckParams, seed: u64, base: &Path) -> Outcome {
    let mut out = Outcome::default();
    out.grid_sizes.push(p.n_steps);
    out.grid_sizes.extend(&p.markovian.coarse);
    out.grid_sizes.push(p.markovian.fine);
    let n = p.n_steps;
    out.guard("flow_property", "flow property of the functional Brownian flow", |o| {
        let grid = Grid::new(p.horizon, n)?;
        let mut r = rng_for(seed, 6);
        let ou = LinearCoefficients::ornstein_uhlenbeck(1.0, 0.3);
        let mut worst = 0.0_f64;
        let mut worst_markov = 0.0_f64;
        for case in 0..p.tuples {
            let fp = FlowParams::new(grid, r.random_range(0.1..2.0), r.random())?;
            let mut k: Vec<usize> = (0..3).map(|_| r.random_range(0..=n)).collect();
            k.sort_unstable();
            let eta = rough_path(grid, derive_seed(seed, 200 + case as u64), r.random_range(0.1..2.0));
            let w = sample_brownian(&fp, case as u64);
            let (s, t, u) = (grid.time(k[0]), grid.time(k[1]), grid.time(k[2]));
            worst = worst.max(check_flow_property(s, t, u, &eta, &w, fp.sigma)?);
            worst_markov = worst_markov.max(check_flow_property_markovian(s, t, u, &eta, &ou, &w)?);
        }
        o.checks.push(Check::abs_le(
            "flow_property",
            "flow property of the functional Brownian flow",
            worst,
            p.flow_tol,
        ));
        o.checks.push(Check::abs_le(
            "flow_property_euler",
            "flow property of the Euler Markovian flow on one grid",
            worst_markov,
            p.flow_tol,
        ));
        Ok(())
    });
    out.guard("continuity", "modulus bound on the flow", |o| {
        let grid = Grid::new(p.horizon, n)?;
        let mut r = rng_for(seed, 7);
        let mut margin = f64::INFINITY;
        let mut growth = f64::INFINITY;
        for case in 0..p.continuity_cases {
            let fp = FlowParams::new(grid, r.random_range(0.1..2.0), derive_seed(seed, 300 + case as u64))?;
            let eta = rough_path(grid, derive_seed(seed, 400 + case as u64), 1.0);
            let w = sample_brownian(&fp, case as u64);
            let s = grid.time(r.random_range(0..n / 2));
            let t = grid.time(r.random_range(n / 2..=n));
            let t2 = grid.time(r.random_range(n / 2..=n));
            margin = margin.min(check_continuity(s, t, t2, &eta, &w, fp.sigma)?.margin());
            let (norm, bound) = growth_bound(s, &eta, &w, fp.sigma)?;
            growth = growth.min(bound - norm);
        }
        o.checks.push(Check::at_least("continuity", "modulus bound on the flow (bound - deviation)", margin, -1e-12));
        o.checks.push(Check::at_least("growth", "linear growth bound on the flow (bound - norm)", growth, 0.0));
        Ok(())
    });
    out.guard("time_homogeneity", "time homogeneity of the flow (KS)", |o| {
        let ks = &p.ks;
        let grid = Grid::new(p.horizon, n)?;
        let fp = FlowParams::new(grid, 1.0, derive_seed(seed, 8))?;
        let eta = ks.eta.build(grid, base)?;
        let tab = check_time_homogeneity(&fp, ks.s, ks.t, &eta, ks.n_paths, ks.alpha)?;
        let mut table = Table::new("ks.csv", &["probe", "statistic", "critical"]);
        for (x, d) in tab.probes.iter().zip(&tab.statistics) {
            table.push(vec![cell(x), cell(d), cell(tab.critical)]);
        }
        o.checks.push(Check::abs_le(
            "time_homogeneity",
            "time homogeneity of the flow (max KS statistic vs critical value)",
            tab.max,
            tab.critical,
        ));
        o.tables.push(table);
        Ok(())
    });
    out.guard("euler_rate", "strong order one half of the Euler flow", |o| {
        let m = &p.markovian;
        let coeffs = LinearCoefficients::ornstein_uhlenbeck(m.theta, m.sigma);
        let eta = |x: f64| 0.5 + 0.3 * (2.0 * x).sin();
        let (s, t, r) = (m.times[0], m.times[1], m.times[2]);
        let rows = markovian_strong_deviation(
            p.horizon,
            (s, t, r),
            &eta,
            &coeffs,
            &m.coarse,
            m.fine,
            m.n_paths,
            derive_seed(seed, 9),
        )?;
        let mut table = Table::new("euler_deviation.csv", &["n_steps", "mean_deviation", "std_error", "ratio"]);
        let mut worst = 0.0_f64;
        for (i, row) in rows.iter().enumerate() {
            let ratio = if i > 0 { rows[i - 1].mean_deviation / row.mean_deviation } else { f64::NAN };
            if i > 0 {
                worst = worst.max((ratio - m.ratio_target).abs());
            }
            table.push(vec![cell(row.n_steps), cell(row.mean_deviation), cell(row.std_error), cell(ratio)]);
        }
        o.checks.push(Check::abs_le(
            "euler_rate",
            "deviation of the composed Euler flow halves when N doubles (|ratio - 2|)",
            worst,
            m.ratio_tol,
        ));
        o.tables.push(table);
        Ok(())
    });
    out
}

fn builtin_label(b: &Builtin) -> String {
    serde_json::to_value(b)
        .ok()
        .and_then(|v| v.get("name").and_then(|n| n.as_str()).map(str::to_string))
        .unwrap_or_else(|| "functional".into())
}

/// `(a - b) / (2ε)` per path.
fn paired_difference(a: &[f64], b: &[f64], eps: f64, seed: u64) -> MCEstimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * eps)).collect();
    MCEstimate::from_samples(&d, seed)
}

fn smooth(p: &SmoothParams, seed: u64, base: &Path) -> Outcome {
    let mut out = Outcome::default();
    out.grid_sizes.push(p.n_steps);
    let mut fd_table = Table::new("smooth_derivatives.csv", &["functional", "quantity", "estimate", "difference", "combined_se"]);
    for (i, b) in p.functionals.iter().enumerate() {
        let mut label = builtin_label(b);
        if p.functionals[..i].iter().any(|o| builtin_label(o) == label) {
            label = format!("{label}_{i}");
        }
        let reference = "directional derivative against CRN central difference";
        out.guard(&format!("du/{label}"), reference, |o| {
            let grid = Grid::new(p.horizon, p.n_steps)?;
            let s = SmoothSolver::new(b.compile(grid), p.sigma)?;
            let eta = p.eta.build(grid, base)?;
            let g = p.direction.build(grid, base)?;
            let sd = derive_seed(seed, 10 + i as u64);
            let pair = s.du_pair(p.t, &eta, &g, p.n_paths, sd)?;
            let up = s.u_samples(p.t, &eta.axpy(p.fd_eps, &g)?, p.n_paths, sd)?;
            let dn = s.u_samples(p.t, &eta.axpy(-p.fd_eps, &g)?, p.n_paths, sd)?;
            let fd = paired_difference(&up, &dn, p.fd_eps, sd);
            let se = combined_se(pair.std_error, fd.std_error);
            o.checks.push(
                Check::abs_le(&format!("du/{label}"), reference, pair.value - fd.value, p.fd_tol + 3.0 * se).with_se(se),
            );
            o.tables.push(row_table(&label, "du", pair.value, fd.value, se));
            Ok(())
        });
        let reference = "time derivative against CRN central difference";
        out.guard(&format!("dtu/{label}"), reference, |o| {
            let grid = Grid::new(p.horizon, p.n_steps)?;
            let s = SmoothSolver::new(b.compile(grid), p.sigma)?;
            let eta = p.eta_time.build(grid, base)?;
            let k = grid.time_index(p.t)?;
            if k == 0 || k >= p.n_steps {
                return Err(CliError::Parse(format!("t = {} must be an interior grid time", p.t)));
            }
            let dt = grid.step();
            let sd = derive_seed(seed, 20 + i as u64);
            let up = s.u_samples(grid.time(k + 1), &eta, p.n_paths, sd)?;
            let dn = s.u_samples(grid.time(k - 1), &eta, p.n_paths, sd)?;
            let fd = paired_difference(&up, &dn, dt, sd);
            let est = s.dtu(grid.time(k), &eta, p.n_paths, sd)?;
            let se = combined_se(est.std_error, fd.std_error);
            o.checks.push(
                Check::abs_le(&format!("dtu/{label}"), reference, est.value - fd.value, p.fd_tol + 3.0 * se).with_se(se),
            );
            o.tables.push(row_table(&label, "dtu", est.value, fd.value, se));
            Ok(())
        });
    }
    let mut rest = Vec::new();
    for t in out.tables.drain(..) {
        if t.file == fd_table.file {
            fd_table.rows.extend(t.rows);
        } else {
            rest.push(t);
        }
    }
    out.tables = rest;
    if !fd_table.rows.is_empty() {
        out.tables.push(fd_table);
    }
    let reference = "per-path residual of the Monte Carlo solution";
    out.guard("residual", reference, |o| {
        let grid = Grid::new(p.horizon, p.n_steps)?;
        let s = SmoothSolver::new(p.functionals[0].compile(grid), p.sigma)?;
        let mut table = Table::new("smooth_residual.csv", &["t", "residual", "std_error"]);
        let mut worst = 0.0_f64;
        for (i, &t) in p.residual_times.iter().enumerate() {
            let eta = rough_path(grid, derive_seed(seed, 500 + i as u64), 0.8);
            let e = s.evaluate(t, &eta, p.residual_paths, derive_seed(seed, 30))?;
            worst = worst.max(e.residual.value.abs()).max(e.residual.std_error);
            table.push(vec![cell(t), cell(e.residual.value), cell(e.residual.std_error)]);
        }
        o.checks.push(Check::abs_le("residual", reference, worst, p.residual_tol));
        o.tables.push(table);
        Ok(())
    });
    let reference = "u(0, 0) for the square of the integral equals σ²T³/3";
    out.guard("second_moment", reference, |o| {
        let grid = Grid::new(p.horizon, p.n_steps)?;
        let s = SmoothSolver::new(Builtin::square_of_integral().compile(grid), p.sigma)?;
        let e = s.u(0.0, &SampledPath::zero(grid), p.moment_paths, derive_seed(seed, 31))?;
        let oracle = p.sigma * p.sigma * p.horizon.powi(3) / 3.0;
        o.checks.push(Check::within_3se("second_moment", reference, e.value - oracle, e.std_error));
        Ok(())
    });
    let reference = "u(t, σW_t) is a martingale";
    out.guard("martingale", reference, |o| {
        let m = &p.martingale;
        let grid = Grid::new(p.horizon, p.n_steps)?;
        let s = SmoothSolver::new(m.functional.compile(grid), p.sigma)?;
        let rows = s.martingale_check(&m.times, m.n_outer, m.n_inner, derive_seed(seed, 32))?;
        let mut table = Table::new("martingale_smooth.csv", &["t", "mean", "std_error", "deviation", "combined_se"]);
        for r in &rows {
            table.push(vec![cell(r.t), cell(r.mean), cell(r.std_error), cell(r.deviation), cell(r.combined_se)]);
        }
        for r in rows.iter().skip(1) {
            o.checks.push(Check::within_3se(&format!("martingale/t={}", r.t), reference, r.deviation, r.combined_se));
        }
        o.tables.push(table);
        Ok(())
    });
    out
}

fn row_table(label: &str, quantity: &str, est: f64, fd: f64, se: f64) -> Table {
    let mut t = Table::new("smooth_derivatives.csv", &["functional", "quantity", "estimate", "difference", "combined_se"]);
    t.push(vec![label.into(), quantity.into(), cell(est), cell(fd), cell(se)]);
    t
}

fn clark_ocone(p: &ClarkOconeParams, seed: u64) -> Outcome {
    let mut out = Outcome::default();
    for (i, c) in p.cases.iter().enumerate() {
        out.grid_sizes.push(c.n_steps);
        out.grid_sizes.extend(&c.n_list);
        let reference = "h = u(0) + ∫ D^{δ₀}u d⁻X pathwise (relative rmse)";
        let name = format!("{}/rmse_rel", c.label);
        out.guard(&name, reference, |o| {
            let grid = Grid::new(p.horizon, c.n_steps)?;
            let sd = derive_seed(seed, 0x40 + i as u64);
            let driver = match c.driver.kind {
                DriverKind::Brownian => DriverSpec::brownian(grid, c.driver.sigma, c.n_paths, sd),
                DriverKind::BrownianPlusFbm => {
                    let h = c.driver.hurst.ok_or_else(|| CliError::Parse(format!("case {}: hurst is required", c.label)))?;
                    DriverSpec::brownian_plus_fbm(grid, c.driver.sigma, h, c.n_paths, sd)
                }
            };
            let r = representation_check(&c.solver, &driver, &c.n_list)?;
            o.checks.push(Check::abs_le(&name, reference, r.rmse_rel, c.tolerance));
            if c.decreasing {
                let violations = r.convergence_table.windows(2).filter(|w| w[1].rmse_rel >= w[0].rmse_rel).count();
                o.checks.push(Check::abs_le(
                    &format!("{}/decreasing", c.label),
                    "rmse decreases as the grid is refined (violations)",
                    violations as f64,
                    0.0,
                ));
            }
            let mut table =
                Table::new(&format!("clark_ocone_{}.csv", c.label), &["n_steps", "rmse_rel", "bias", "se", "u0"]);
            if r.convergence_table.is_empty() {
                table.push(vec![cell(c.n_steps), cell(r.rmse_rel), cell(r.bias), String::new(), cell(r.u0)]);
            }
            for row in &r.convergence_table {
                table.push(vec![cell(row.n_steps), cell(row.rmse_rel), cell(row.bias), cell(row.se), cell(r.u0)]);
            }
            o.tables.push(table);
            Ok(())
        });
    }
    out
}
