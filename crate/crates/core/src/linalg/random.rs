//! Gaussian and Haar-distributed random matrices.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, ComplexMatrix, Matrix, RealMatrix, Scalar};

/// Entries i.i.d. standard normal (complex entries have `E|z|² = 1`).
pub fn gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    complex: bool,
    rng: &mut R,
) -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        if complex {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * h, im * h)
        } else {
            Complex64::new(rng.sample(StandardNormal), 0.0)
        }
    })
}

/// Gram-Schmidt QR keeping only `Q`, run twice per column for stability.
///
/// The implied `R` has a real positive diagonal, which is the phase
/// convention that makes `Q` of a Ginibre matrix exactly Haar distributed.
/// Returns `None` if the columns are numerically dependent.
pub fn orthonormalize_columns<T: Scalar>(m: &Matrix<T>) -> Option<Matrix<T>> {
    let mut cols: Vec<Vec<T>> = (0..m.cols()).map(|j| m.column(j)).collect();
    for j in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(j);
        let w = &mut rest[0];
        let start = super::norm(w);
        for _ in 0..2 {
            for q in done.iter() {
                let proj = dot(q, w);
                for (wi, &qi) in w.iter_mut().zip(q) {
                    *wi = *wi - qi * proj;
                }
            }
        }
        let r = super::norm(w);
        if !(r > 1e-12 * start) || r == 0.0 {
            return None;
        }
        for wi in w.iter_mut() {
            *wi = *wi * (1.0 / r);
        }
    }
    Matrix::from_columns(&cols).ok()
}

/// Haar-random `N × N` unitary.
pub fn haar_unitary(n: usize, seed: u64) -> ComplexMatrix {
    haar_unitary_with(n, &mut crate::rng::rng_from_seed(seed))
}

pub fn haar_unitary_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    haar_isometry(n, n, true, rng)
}

/// First `cols` columns of a Haar unitary (or orthogonal matrix when
/// `complex` is false), sampled directly from an `n × cols` Ginibre matrix.
pub fn haar_isometry<R: Rng + ?Sized>(
    n: usize,
    cols: usize,
    complex: bool,
    rng: &mut R,
) -> ComplexMatrix {
    assert!(cols <= n && n >= 1);
    loop {
        // Dependent Gaussian columns have probability zero; redraw if hit.
        if complex {
            if let Some(q) = orthonormalize_columns(&gaussian_matrix(n, cols, true, rng)) {
                return q;
            }
        } else {
            let g = RealMatrix::from_fn(n, cols, |_, _| rng.sample(StandardNormal));
            if let Some(q) = orthonormalize_columns(&g) {
                return q.to_complex();
            }
        }
    }
}

/// Uniformly random point on the real unit sphere in `R^n`.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = super::norm(&v);
        if nrm > 1e-300 {
            return v.into_iter().map(|x| x / nrm).collect();
        }
    }
}
