//! Shared inputs for the kernel benchmarks.

pub use qrp_core;

use qrp_core::linalg::random_unit_vector;
use qrp_core::rng::rng_from_seed;

/// Deterministic unit vector of length `dim`.
pub fn unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    random_unit_vector(dim, &mut rng_from_seed(seed))
}
