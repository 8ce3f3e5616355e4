mod common;

use pathheat_core::cylindrical::{Basis, CylSolver, CylindricalSpec, Payoff};
use pathheat_core::path::{Grid, SampledPath, Trajectory};
use pathheat_core::regcalc::Mode;
use pathheat_core::rng::{NormalStream, BROWNIAN};
use pathheat_core::Error;
use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn one() -> Basis {
    Basis::Constant { value: 1.0 }
}

fn s() -> Basis {
    Basis::Polynomial { coeffs: vec![0.0, 1.0] }
}

fn solver(n_steps: usize, sigma: f64, basis: Vec<Basis>, payoff: Payoff) -> CylSolver {
    let grid = Grid::new(1.0, n_steps).unwrap();
    CylSolver::new(CylindricalSpec::new(grid, sigma, basis, payoff).unwrap()).unwrap()
}

/// `y Φ(y/s) + s ϕ(y/s)`.
fn bachelier(y: f64, s: f64) -> f64 {
    let n = Normal::standard();
    y * n.cdf(y / s) + s * n.pdf(y / s)
}

#[test]
fn psi_of_square_is_shifted_second_moment() {
    let sigma = 0.8;
    let sol = solver(100, sigma, vec![one()], Payoff::Square);
    for (t, y) in [(0.0, 0.3), (0.25, -1.2), (0.9, 2.0)] {
        let expect = y * y + sigma * sigma * (1.0 - t);
        assert!((sol.psi(t, &[y]).unwrap() - expect).abs() < 1e-12);
    }
}

#[test]
fn psi_at_horizon_is_the_payoff() {
    let sol = solver(100, 1.0, vec![one()], Payoff::Call { strike: 0.0 });
    assert_eq!(sol.psi(1.0, &[0.7]).unwrap(), 0.7);
    assert_eq!(sol.psi(1.0, &[-0.7]).unwrap(), 0.0);
    assert!(matches!(sol.psi(1.5, &[0.0]), Err(Error::Domain(_))));
}

#[test]
fn bachelier_grid() {
    let sol = solver(100, 1.0, vec![one()], Payoff::Call { strike: 0.0 });
    let grid = sol.spec().grid;
    let mut worst = 0.0_f64;
    for ti in 0..20 {
        let k = ti * 5;
        let t = grid.time(k);
        for yi in 0..20 {
            let y = -2.0 + 4.0 * yi as f64 / 19.0;
            let u = sol.u(t, &SampledPath::constant(grid, y)).unwrap();
            worst = worst.max((u - bachelier(y, (1.0 - t).sqrt())).abs());
        }
    }
    assert!(worst < 1e-6, "max error {worst:e}");
}

#[test]
fn degenerate_sigma() {
    let sol = solver(10, 0.0, vec![one()], Payoff::Call { strike: 0.0 });
    assert_eq!(sol.psi(0.3, &[0.4]).unwrap(), 0.4);
}

#[test]
fn u_examples() {
    let sigma = 1.3;
    let grid = Grid::new(1.0, 200).unwrap();
    let eta = common::rough_path(grid, 3, 0.5);
    let sq = solver(200, sigma, vec![one()], Payoff::Square);
    let lin = solver(200, sigma, vec![one()], Payoff::Linear { coeffs: vec![1.0] });
    for k in [0, 50, 120, 199] {
        let t = grid.time(k);
        let u = sq.u(t, &eta).unwrap();
        assert!((u - (eta.last().powi(2) + sigma * sigma * (1.0 - t))).abs() < 1e-11);
        assert!((lin.u(t, &eta).unwrap() - eta.last()).abs() < 1e-12);
    }
    let y = sq.features(1.0, &eta).unwrap();
    assert_eq!(sq.u(1.0, &eta).unwrap(), y[0] * y[0]);
}

#[test]
fn features_examples() {
    let grid = Grid::new(1.0, 64).unwrap();
    let sol = solver(64, 1.0, vec![one(), s()], Payoff::Sum2);
    let eta = common::rough_path(grid, 1, 1.0);
    let y = sol.features(0.5, &eta).unwrap();
    assert_eq!(y[0], eta.last());
    assert_eq!(sol.features(0.5, &SampledPath::zero(grid)).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn features_agree_with_closed_forward_integrals() {
    let mut rng = common::rng(17);
    let grid = Grid::new(1.0, 128).unwrap();
    for case in 0..20 {
        let basis = vec![
            Basis::Polynomial { coeffs: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect() },
            Basis::Sin { amp: rng.random_range(0.5..2.0), freq: rng.random_range(0.5..4.0), phase: rng.random_range(0.0..1.0) },
            Basis::Exp { scale: 1.0, rate: rng.random_range(-1.0..1.0) },
        ];
        let sol = solver(128, 1.0, basis, Payoff::Linear { coeffs: vec![1.0, 1.0, 1.0] });
        let eta = common::rough_path(grid, case, rng.random_range(0.1..2.0));
        let t = grid.time(rng.random_range(0..=128));
        let a = sol.features(t, &eta).unwrap();
        let b = sol.features_via_forward_integral(t, &eta, Mode::Closed).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8, "case {case}: {x} vs {y}");
        }
    }
}

#[test]
fn square_derivatives_closed_form() {
    let sigma = 0.9;
    let grid = Grid::new(1.0, 100).unwrap();
    let sol = solver(100, sigma, vec![one()], Payoff::Square);
    let eta = common::rough_path(grid, 5, 1.0);
    let t = 0.4;
    let du = sol.du(t, &eta).unwrap();
    assert!((du.atom0() - 2.0 * eta.last()).abs() < 1e-11);
    assert!(du.density().unwrap().values().iter().all(|v| v.abs() < 1e-12));
    let d2 = sol.d2u(t, &eta).unwrap();
    assert!((d2.atom00 - 2.0).abs() < 1e-11);
    assert!((sol.dtu(t, &eta).unwrap() + sigma * sigma).abs() < 1e-11);
}

#[test]
fn linear_payoff_has_zero_hessian() {
    let grid = Grid::new(1.0, 50).unwrap();
    let sol = solver(50, 1.0, vec![one(), s()], Payoff::Linear { coeffs: vec![1.0, -2.0] });
    let d2 = sol.d2u(0.3, &common::rough_path(grid, 2, 1.0)).unwrap();
    let g = common::smooth_path(grid, 1.0, 0.5);
    assert!(d2.pair(&g, &g).unwrap().abs() < 1e-12);
    assert!(d2.atom00.abs() < 1e-12);
}

fn specs() -> Vec<(CylSolver, f64)> {
    vec![
        (solver(400, 1.0, vec![one()], Payoff::Square), 1e-6),
        (solver(400, 1.0, vec![one(), s()], Payoff::Sum2), 1e-6),
        (solver(400, 1.0, vec![one()], Payoff::Call { strike: 0.0 }), 1e-5),
    ]
}

#[test]
fn du_matches_central_differences() {
    for (sol, _) in specs() {
        let grid = sol.spec().grid;
        let eta = common::rough_path(grid, 9, 0.6);
        let g = common::smooth_path(grid, 0.7, -0.4);
        let eps = 1e-4;
        for k in [40, 200, 360] {
            let t = grid.time(k);
            let pair = sol.du(t, &eta).unwrap().pair(&g).unwrap();
            let up = sol.u(t, &eta.axpy(eps, &g).unwrap()).unwrap();
            let dn = sol.u(t, &eta.axpy(-eps, &g).unwrap()).unwrap();
            let fd = (up - dn) / (2.0 * eps);
            assert!((pair - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{:?}: {pair} vs {fd}", sol.spec().payoff);
        }
    }
}

#[test]
fn d2u_matches_second_differences_and_is_symmetric() {
    for (sol, _) in specs().into_iter().take(2) {
        let grid = sol.spec().grid;
        let eta = common::rough_path(grid, 4, 0.8);
        let g = common::smooth_path(grid, 1.0, 0.3);
        let h = SampledPath::from_fn(grid, |x| 0.5 - x + (4.0 * x).sin());
        let t = 0.35;
        let d2 = sol.d2u(t, &eta).unwrap();
        let eps = 1e-3;
        let u = |a: f64, b: f64| sol.u(t, &eta.axpy(a, &g).unwrap().axpy(b, &h).unwrap()).unwrap();
        let fd = (u(eps, eps) - u(eps, -eps) - u(-eps, eps) + u(-eps, -eps)) / (4.0 * eps * eps);
        let pair = d2.pair(&g, &h).unwrap();
        assert!((pair - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{pair} vs {fd}");
        assert!(d2.asymmetry(&g, &h).unwrap() < 1e-12);
    }
}

#[test]
fn dtu_matches_time_differences() {
    let sol = solver(2000, 1.0, vec![one(), Basis::Sin { amp: 1.0, freq: 2.0, phase: 0.3 }], Payoff::Sum2);
    let grid = sol.spec().grid;
    let eta = common::smooth_path(grid, 1.0, 0.4);
    let k = 700;
    let dt = grid.step();
    let fd = (sol.u(grid.time(k + 1), &eta).unwrap() - sol.u(grid.time(k - 1), &eta).unwrap()) / (2.0 * dt);
    let d = sol.dtu(grid.time(k), &eta).unwrap();
    assert!((d - fd).abs() < 1e-4, "{d} vs {fd}");
}

#[test]
fn residual_vanishes_at_random_points() {
    let mut rng = common::rng(23);
    for (sol, tol) in specs() {
        let grid = sol.spec().grid;
        for i in 0..20 {
            let k = rng.random_range(0..=360);
            let eta = common::rough_path(grid, 100 + i, rng.random_range(0.2..1.5));
            let r = sol.residual(grid.time(k), &eta).unwrap();
            assert!(r.abs() <= tol, "{:?} t={} residual {r:e}", sol.spec().payoff, grid.time(k));
        }
    }
}

#[test]
fn singular_gram_near_horizon_is_reported() {
    let quad = Basis::Polynomial { coeffs: vec![0.0, 0.0, 1.0] };
    let sol = solver(100, 1.0, vec![one(), s(), quad], Payoff::Sum2);
    let grid = sol.spec().grid;
    let eta = SampledPath::zero(grid);
    assert!(sol.du(0.5, &eta).is_ok());
    assert!(matches!(sol.du(0.99, &eta), Err(Error::SingularGram { .. })));
    assert!(matches!(sol.gram(1.0), Err(Error::SingularGram { .. })));
}

#[test]
fn martingale_property_of_windows() {
    let sigma = 1.0;
    let sol = solver(64, sigma, vec![one(), s()], Payoff::Sum2);
    let grid = sol.spec().grid;
    let u0 = sol.u(0.0, &SampledPath::zero(grid)).unwrap();
    let n_paths = 4000;
    for k in [16, 32, 48] {
        let vals: Vec<f64> = (0..n_paths)
            .map(|p| {
                let mut st = NormalStream::new(99, BROWNIAN, p);
                let mut w = vec![0.0; 65];
                for j in 0..64 {
                    w[j + 1] = w[j] + sigma * grid.step().sqrt() * st.normal();
                }
                let traj = Trajectory::new(grid, w).unwrap();
                sol.u_at(k, &traj.window_at(k)).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n_paths as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64;
        let se = (var / n_paths as f64).sqrt();
        assert!((mean - u0).abs() <= 3.0 * se, "k={k}: {mean} vs {u0} (se {se})");
    }
}
