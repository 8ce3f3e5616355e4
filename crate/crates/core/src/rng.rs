//! Counter-based normal streams.
//!
//! A stream is addressed by `(seed, purpose, index)`: the seed and purpose are
//! mixed into a ChaCha8 key and the index selects the ChaCha stream. Every
//! normal draw consumes exactly two 64-bit words, so draw `k` of a stream can be
//! reached directly and results never depend on scheduling.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Brownian increments of the driving path.
pub const BROWNIAN: u64 = 0x42;
/// Independent fractional component of a driver.
pub const FBM: u64 = 0x46;
/// Inner paths of nested estimators.
pub const INNER: u64 = 0x49;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed, e.g. for a sub-experiment.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(splitmix(seed) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, purpose: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            let word = derive_seed(seed, purpose.wrapping_mul(4).wrapping_add(i as u64));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        Self { rng }
    }

    /// Position the stream at draw `k`.
    pub fn seek(&mut self, k: u64) {
        self.rng.set_word_pos(4 * k as u128);
    }

    /// Uniform on `(0, 1]`.
    fn open_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller (cosine branch only).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.open_uniform();
        let u2 = self.open_uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Two independent standard normals from the same two words as [`normal`](Self::normal),
    /// the first of which equals what `normal` would return.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.open_uniform();
        let u2 = self.open_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = self.normal());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_draws() {
        let mut a = NormalStream::new(7, BROWNIAN, 3);
        let mut b = NormalStream::new(7, BROWNIAN, 3);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn seek_gives_random_access() {
        let mut a = NormalStream::new(11, INNER, 0);
        let draws: Vec<f64> = (0..50).map(|_| a.normal()).collect();
        let mut b = NormalStream::new(11, INNER, 0);
        b.seek(37);
        assert_eq!(b.normal().to_bits(), draws[37].to_bits());
    }

    #[test]
    fn streams_and_purposes_differ() {
        let x = NormalStream::new(1, BROWNIAN, 0).normal();
        assert_ne!(x, NormalStream::new(1, BROWNIAN, 1).normal());
        assert_ne!(x, NormalStream::new(1, FBM, 0).normal());
        assert_ne!(x, NormalStream::new(2, BROWNIAN, 0).normal());
    }

    #[test]
    fn pair_starts_with_normal() {
        let x = NormalStream::new(3, INNER, 2).normal();
        let (a, b) = NormalStream::new(3, INNER, 2).normal_pair();
        assert_eq!(a.to_bits(), x.to_bits());
        assert_ne!(a, b);
    }

    #[test]
    fn moments_are_standard() {
        let mut s = NormalStream::new(5, BROWNIAN, 9);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}
