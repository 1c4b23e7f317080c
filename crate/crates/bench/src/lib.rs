//! Shared fixtures for the criterion benchmarks.

use cernn_core::losses::sample_mvn;
use cernn_core::rng::substream;
use cernn_core::spectral::SymMatrix;
use ndarray::{Array1, Array2};

/// Deterministic Gaussian data with a geometric population spectrum.
pub fn gaussian_fixture(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let eigenvalues: Vec<f64> = (0..p).map(|i| 4.0 * 0.95f64.powi(i as i32)).collect();
    let cov = SymMatrix::from_diagonal(&eigenvalues);
    let mut rng = substream(seed, 0);
    sample_mvn(Array1::zeros(p).view(), &cov, n, &mut rng).expect("valid covariance")
}
