//! One-dimensional rules for expectations against the standard normal law,
//! and their tensor products.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{GaussHermite, GaussLegendre};

/// Half-width of the truncated domain used when a rule is split at kinks.
pub const TRUNCATION: f64 = 12.0;

/// Nodes and weights with `Σ w_i g(x_i) ≈ E[g(Z)]`, `Z ~ N(0,1)`.
#[derive(Clone, Debug)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn order(q: usize) -> NonZeroUsize {
    NonZeroUsize::new(q.max(1)).expect("non-zero")
}

impl NormalRule {
    /// Gauss–Hermite rule with `q` nodes, rescaled to the standard normal weight.
    pub fn hermite(q: usize) -> Self {
        let rule = GaussHermite::new(order(q));
        let scale = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / scale))
            .unzip();
        Self { nodes, weights }
    }

    /// Piecewise Gauss–Legendre rule on `[-12, 12]` with breakpoints at `kinks`,
    /// `q` nodes per segment, standard normal density folded into the weights.
    pub fn split(q: usize, kinks: &[f64]) -> Self {
        let rule = GaussLegendre::new(order(q));
        let mut cuts: Vec<f64> = kinks
            .iter()
            .copied()
            .filter(|k| k.abs() < TRUNCATION)
            .collect();
        cuts.push(-TRUNCATION);
        cuts.push(TRUNCATION);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for &(x, w) in rule.as_node_weight_pairs() {
                let z = mid + half * x;
                nodes.push(z);
                weights.push(half * w * norm * (-0.5 * z * z).exp());
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// Shared Gauss–Hermite rule of order `q` (built once per order).
pub fn hermite_cached(q: usize) -> &'static NormalRule {
    static CACHE: OnceLock<std::sync::Mutex<Vec<(usize, &'static NormalRule)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    if let Some((_, r)) = guard.iter().find(|(k, _)| *k == q) {
        return r;
    }
    let rule: &'static NormalRule = Box::leak(Box::new(NormalRule::hermite(q)));
    guard.push((q, rule));
    rule
}

/// Visit every node of the tensor product of `rules`, with its weight.
pub fn for_each_tensor(rules: &[&NormalRule], mut visit: impl FnMut(&[f64], f64)) {
    let n = rules.len();
    if n == 0 {
        visit(&[], 1.0);
        return;
    }
    let mut idx = vec![0usize; n];
    let mut point = vec![0.0; n];
    loop {
        let mut w = 1.0;
        for d in 0..n {
            point[d] = rules[d].nodes[idx[d]];
            w *= rules[d].weights[idx[d]];
        }
        visit(&point, w);
        let mut d = n;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < rules[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let r = NormalRule::hermite(16);
        assert!((r.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(r.expect(|x| x).abs() < 1e-14);
        assert!((r.expect(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((r.expect(|x| x.powi(4)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn split_rule_handles_a_kink() {
        // E[max(Z, 0)] = 1/√(2π)
        let r = NormalRule::split(64, &[0.0]);
        let exact = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.expect(|x| x.max(0.0)) - exact).abs() < 1e-14);
        let r = NormalRule::split(64, &[0.37]);
        assert!((r.expect(|x| x * x) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tensor_product_covers_all_nodes() {
        let a = NormalRule::hermite(3);
        let b = NormalRule::hermite(4);
        let mut count = 0;
        let mut mass = 0.0;
        for_each_tensor(&[&a, &b], |_, w| {
            count += 1;
            mass += w;
        });
        assert_eq!(count, 12);
        assert!((mass - 1.0).abs() < 1e-14);
    }
}
