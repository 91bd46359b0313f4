//! Normalized fast Walsh-Hadamard transform.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// `H·v` with `H` the orthonormal (Sylvester-ordered) Walsh-Hadamard matrix.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// In-place normalized transform; `O(N log N)` butterflies followed by a
/// `1/√N` scale. Works for any element type that is a vector space over `f64`.
pub fn fwht_in_place<T>(data: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "Walsh-Hadamard length must be a power of two, got {n}"
        )));
    }
    let mut half = 1;
    while half < n {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    for x in data.iter_mut() {
        *x = *x * scale;
    }
    Ok(())
}
