//! Inputs shared by the benchmarks.

use mdq_core::PLPath;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random walk on `[0, 1]` with `knots` equally spaced knots and steps in
/// `[-1, 1]`.
pub fn random_walk(knots: usize, seed: u64) -> PLPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = (knots - 1) as f64;
    let grid: Vec<f64> = (0..knots).map(|k| k as f64 / last).collect();
    let mut v = 0.0;
    let values = (0..knots)
        .map(|k| {
            if k > 0 {
                v += 2.0 * rng.random::<f64>() - 1.0;
            }
            v
        })
        .collect();
    PLPath::new(grid, values).expect("strictly increasing grid")
}
