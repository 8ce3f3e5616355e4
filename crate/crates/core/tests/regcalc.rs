mod common;

use pathheat_core::path::{Density, Grid, PathMeasure, SampledPath};
use pathheat_core::regcalc::{
    convergence_slope, forward_integral, forward_integral_eps_limit, BvFunction, Formula, IntervalSpec, Mode,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn poly(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let degree = rng.random_range(1..=4);
    (0..=degree).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

struct Case {
    mu: PathMeasure,
    f: SampledPath,
    mu_c: Vec<f64>,
    f_c: Vec<f64>,
    a: f64,
    b: f64,
}

fn case(rng: &mut ChaCha8Rng, grid: Grid) -> Case {
    let mu_c = poly(rng);
    let f_c = poly(rng);
    let mut a: f64 = rng.random_range(-1.0..-0.05);
    let mut b: f64 = rng.random_range(-1.0..0.0);
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    if b - a < 0.05 {
        b = (a + 0.05).min(0.0);
    }
    let mu = PathMeasure::absolutely_continuous(Density::from_fn(grid, |x| eval(&mu_c, x)));
    let f = SampledPath::from_fn(grid, |x| eval(&f_c, x));
    Case { mu, f, mu_c, f_c, a, b }
}

#[test]
fn closed_forms_match_eps_limit() {
    let grid = Grid::new(1.0, 256).unwrap();
    let mut rng = common::rng(101);
    for i in 0..50 {
        let c = case(&mut rng, grid);
        for (mode, bv, formula) in [
            (Mode::Open, true, Formula::Stieltjes),
            (Mode::Open, false, Formula::OpenBoundary),
            (Mode::Closed, true, Formula::ClosedBoundary),
        ] {
            let iv = IntervalSpec::new(c.a, c.b, mode).unwrap();
            let f = BvFunction::new(c.f.clone(), bv);
            let cf = forward_integral(&c.mu, &f, iv).unwrap();
            assert_eq!(cf.formula, Some(formula));
            let el = forward_integral_eps_limit(&c.mu, &f, iv).unwrap();
            let gap = (cf.value - el.value).abs();
            assert!(gap <= 10.0 * el.error_estimate, "case {i} {formula:?}: gap {gap:e}, spread {:e}", el.error_estimate);
            let slope = convergence_slope(&el.eps_table, cf.value);
            assert!(slope >= 0.9, "case {i} {formula:?}: slope {slope}");
        }
    }
}

#[test]
fn closed_minus_open_is_boundary_term() {
    let grid = Grid::new(1.0, 256).unwrap();
    let mut rng = common::rng(202);
    for i in 0..50 {
        let c = case(&mut rng, grid);
        let f = BvFunction::bv(c.f.clone());
        let closed = forward_integral(&c.mu, &f, IntervalSpec::closed(c.a, c.b).unwrap()).unwrap();
        let open = forward_integral(&c.mu, &f, IntervalSpec::open(c.a, c.b).unwrap()).unwrap();
        let expect = c.mu.density().unwrap().eval(c.a).unwrap() * c.f.eval(c.a).unwrap();
        let err = (closed.value - open.value - expect).abs();
        assert!(err <= 1e-10, "case {i}: {err:e}");
        // against the polynomials themselves, up to interpolation error
        let exact = eval(&c.mu_c, c.a) * eval(&c.f_c, c.a);
        assert!((closed.value - open.value - exact).abs() < 1e-3);
    }
}

#[test]
fn stieltjes_against_polynomial_integral() {
    let grid = Grid::new(1.0, 512).unwrap();
    let mut rng = common::rng(7);
    for _ in 0..10 {
        let c = case(&mut rng, grid);
        let df: Vec<f64> = c.f_c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
        let n = 20_000;
        let h = (c.b - c.a) / n as f64;
        let exact: f64 = (0..n)
            .map(|j| {
                let x = c.a + (j as f64 + 0.5) * h;
                eval(&c.mu_c, x) * eval(&df, x) * h
            })
            .sum();
        let v = forward_integral(&c.mu, &BvFunction::bv(c.f.clone()), IntervalSpec::open(c.a, c.b).unwrap()).unwrap();
        assert!((v.value - exact).abs() < 1e-3 * (1.0 + exact.abs()), "{} vs {exact}", v.value);
    }
}
