#![allow(dead_code)]

use pathheat_core::path::{Grid, SampledPath};
use pathheat_core::rng::NormalStream;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Brownian-looking path on `[-T,0]` plus a smooth bump, reproducible from `seed`.
pub fn rough_path(grid: Grid, seed: u64, scale: f64) -> SampledPath {
    let mut s = NormalStream::new(seed, 0x7e57, 0);
    let sd = grid.step().sqrt();
    let mut acc = s.normal();
    let mut values = Vec::with_capacity(grid.n_nodes());
    for k in 0..grid.n_nodes() {
        values.push(scale * acc + 0.3 * (2.0 * grid.x(k)).sin());
        acc += sd * s.normal();
    }
    SampledPath::new(grid, values).unwrap()
}

pub fn smooth_path(grid: Grid, a: f64, b: f64) -> SampledPath {
    SampledPath::from_fn(grid, |x| a * (1.7 * x).cos() + b * x * x)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
