//! Seeded series generators shared by the acceptance suite.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `len` independent standard normal draws.
pub fn gaussian_series(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Discrete Ornstein-Uhlenbeck path `y_t = φ y_{t-1} + σ e_t` starting at 0.
pub fn mean_reverting(seed: u64, len: usize, phi: f64, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    let mut y = Vec::with_capacity(len);
    if len > 0 {
        y.push(level);
    }
    for _ in 1..len {
        let e: f64 = StandardNormal.sample(&mut rng);
        level = phi * level + sd * e;
        y.push(level);
    }
    y
}
