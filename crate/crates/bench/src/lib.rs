//! Shared inputs for the benchmarks.

use wigglehair::C64;

/// `n` points on a ring `|z| = r` spread over the angular window `[-w, w]`.
pub fn ring(n: usize, r: f64, w: f64) -> Vec<C64> {
    (0..n)
        .map(|j| C64::from_polar(r, -w + 2.0 * w * (j as f64 + 0.5) / n as f64))
        .collect()
}
