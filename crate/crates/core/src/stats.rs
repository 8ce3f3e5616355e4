//! Monte Carlo estimates and the two-sample Kolmogorov–Smirnov statistic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Mean and standard error, summed in index order.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { value: f64::NAN, std_error: f64::NAN, n_paths: 0, seed };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { value: mean, std_error, n_paths: n, seed }
    }

    /// A value known without sampling error.
    pub fn exact(value: f64, seed: u64) -> Self {
        Self { value, std_error: 0.0, n_paths: 0, seed }
    }

    /// `|value - other| ≤ k · combined SE`, for independent estimates.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.std_error
    }
}

/// `√(a² + b²)`.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Map over path indices in parallel, results in index order.
pub fn map_paths<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

/// `sup_x |F_a(x) - F_b(x)|` of the two empirical distribution functions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(0.5 * alpha).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}
