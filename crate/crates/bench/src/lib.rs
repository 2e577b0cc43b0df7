//! Inputs shared by the benchmarks.

use poisson_approx::LatticeDistribution;

/// A law with `len` cells and smoothly varying weights.
pub fn smooth_law(len: usize) -> LatticeDistribution {
    let raw: Vec<f64> = (0..len)
        .map(|i| 1.0 + (i as f64 * 0.37).sin().abs())
        .collect();
    let total: f64 = raw.iter().sum();
    LatticeDistribution::new(1.0, 0, raw.into_iter().map(|w| w / total).collect(), 0.0)
        .expect("valid weights")
}
