use pathheat_core::clark_ocone::{
    forward_stochastic_integral, quadratic_variation, representation_check, sample_driver, DriverSpec, SolverSpec,
};
use pathheat_core::cylindrical::{Basis, Payoff};
use pathheat_core::flow::{sample_brownian, FlowParams};
use pathheat_core::path::Grid;
use pathheat_core::smooth::Builtin;
use pathheat_core::stats::MCEstimate;

fn one() -> Vec<Basis> {
    vec![Basis::Constant { value: 1.0 }]
}

#[test]
fn brownian_driver_is_the_flow_generator() {
    let grid = Grid::new(1.0, 32).unwrap();
    let d = DriverSpec::brownian(grid, 1.0, 1, 9);
    let w = sample_brownian(&FlowParams::new(grid, 1.0, 9).unwrap(), 4);
    assert_eq!(sample_driver(&d, 4).unwrap(), w);
}

#[test]
fn fbm_driver_quadratic_variation() {
    let grid = Grid::new(1.0, 1024).unwrap();
    let d = DriverSpec::brownian_plus_fbm(grid, 1.0, 0.75, 200, 3);
    let qv: Vec<f64> = (0..200).map(|i| quadratic_variation(&sample_driver(&d, i).unwrap())).collect();
    let mean = qv.iter().sum::<f64>() / qv.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn ito_integral_of_brownian_motion() {
    let grid = Grid::new(1.0, 256).unwrap();
    let d = DriverSpec::brownian(grid, 1.0, 1, 5);
    let mut sums = Vec::new();
    let mut err2 = 0.0;
    let n = 4000;
    for i in 0..n {
        let w = sample_driver(&d, i).unwrap();
        let a: Vec<f64> = w.values()[..256].to_vec();
        let s = forward_stochastic_integral(&a, &w).unwrap();
        err2 += (s - 0.5 * (w.value(256).powi(2) - 1.0)).powi(2);
        sums.push(s);
    }
    let e = MCEstimate::from_samples(&sums, 5);
    assert!(e.value.abs() <= 3.0 * e.std_error);
    assert!((err2 / n as f64).sqrt() < 2.0 * (1.0 / 256.0_f64).sqrt());
}

#[test]
fn linear_payoff_telescopes() {
    let grid = Grid::new(1.0, 128).unwrap();
    let solver = SolverSpec::Cylindrical { basis: one(), payoff: Payoff::Linear { coeffs: vec![1.0] } };
    let r = representation_check(&solver, &DriverSpec::brownian(grid, 1.0, 500, 1), &[]).unwrap();
    assert!(r.rmse_rel <= 1e-12, "{r:?}");
}

#[test]
fn quadratic_payoff_converges() {
    let grid = Grid::new(1.0, 256).unwrap();
    let solver = SolverSpec::Cylindrical { basis: one(), payoff: Payoff::Square };
    let r = representation_check(&solver, &DriverSpec::brownian(grid, 1.0, 2000, 2), &[64, 128, 256]).unwrap();
    assert!((r.u0 - 1.0).abs() < 1e-12);
    for w in r.convergence_table.windows(2) {
        assert!(w[1].rmse_rel < w[0].rmse_rel, "{r:?}");
    }
    // rmse of Σ(ΔW)² - T relative to √E[W_T⁴]
    let expect = (2.0 / 256.0_f64).sqrt() / 3.0_f64.sqrt();
    assert!((r.rmse_rel - expect).abs() < 0.15 * expect, "{} vs {expect}", r.rmse_rel);
}

#[test]
fn smooth_quadratic_converges() {
    let grid = Grid::new(1.0, 32).unwrap();
    let solver = SolverSpec::Smooth { functional: Builtin::square_of_integral(), inner_pairs: 1, reference_paths: 50_000 };
    let r = representation_check(&solver, &DriverSpec::brownian(grid, 1.0, 1000, 4), &[8, 16, 32]).unwrap();
    for w in r.convergence_table.windows(2) {
        assert!(w[1].rmse_rel < w[0].rmse_rel, "{r:?}");
    }
}
