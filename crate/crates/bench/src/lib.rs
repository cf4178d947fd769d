//! Shared fixtures for the criterion benches.

use tierflow::{RngStream, Tensor2};

/// `rows x cols` matrix of standard-normal draws.
pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Tensor2 {
    let mut rng = RngStream::new(seed);
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Tensor2::from_vec(rows, cols, data).expect("sized buffer")
}

/// Balanced 0/1 labels.
pub fn alternating_labels(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i % 2) as f64).collect()
}
