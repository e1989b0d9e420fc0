//! Shared fixtures for the benchmarks.

use optkit::SearchSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` internal vectors drawn uniformly from `space`.
pub fn sample_batch(space: &SearchSpace, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| space.sample_internal(&mut rng)).collect()
}

