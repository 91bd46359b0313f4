//! One-sided (Hestenes) Jacobi singular value decomposition.
//!
//! Columns of the working copy are orthogonalized pairwise by plane rotations
//! until every pair satisfies `|a_p† a_q| ≤ tol·‖a_p‖‖a_q‖`. The column norms
//! are then the singular values and the normalized columns the left vectors;
//! the accumulated rotations form the right vectors. Wide inputs are handled
//! through the adjoint.

use super::{dot, Matrix, Scalar};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U · diag(σ) · V†` with `p = min(rows, cols)` singular triplets.
#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    /// `rows × p`, orthonormal columns.
    pub u: Matrix<T>,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols × p`, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// `U · diag(σ) · V†`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let p = self.singular_values.len();
        let us = Matrix::from_fn(self.u.rows(), p, |i, j| {
            self.u[(i, j)] * self.singular_values[j]
        });
        us.matmul(&self.v.adjoint()).expect("conformant factors")
    }
}

pub fn svd<T: Scalar>(m: &Matrix<T>) -> Result<SvdResult<T>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    if !m.is_finite() {
        return Err(Error::invalid("svd input has non-finite entries"));
    }
    if m.rows() < m.cols() {
        let t = jacobi_tall(&m.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    jacobi_tall(m)
}

fn jacobi_tall<T: Scalar>(m: &Matrix<T>) -> Result<SvdResult<T>> {
    let (rows, n) = (m.rows(), m.cols());
    let mut a: Vec<Vec<T>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::ZERO; n];
            e[j] = T::ONE;
            e
        })
        .collect();

    let frob2: f64 = a.iter().flatten().map(|x| x.norm_sqr()).sum();
    // Columns below this squared norm are numerically zero.
    let negligible = (f64::EPSILON * f64::EPSILON) * frob2;
    let tol = f64::EPSILON * rows as f64;

    // Largest columns first speeds convergence.
    let mut norms: Vec<f64> = a.iter().map(|c| sq_norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    a = order.iter().map(|&j| a[j].clone()).collect();
    v = order.iter().map(|&j| v[j].clone()).collect();
    norms = order.iter().map(|&j| norms[j]).collect();

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&a[p], &a[q]);
                let g = gamma.abs();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rephase column q so that a_p† a_q = g is real, then rotate.
                let phase = (gamma * (1.0 / g)).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = a.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], phase, c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], phase, c, s);
                norms[p] = alpha - t * g;
                norms[q] = beta + t * g;
            }
        }
        for (nrm, col) in norms.iter_mut().zip(&a) {
            *nrm = sq_norm(col);
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { sweeps: MAX_SWEEPS });
    }

    let mut sigma: Vec<f64> = a.iter().map(|c| sq_norm(c).sqrt()).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let sigma_floor = negligible.sqrt().max(f64::MIN_POSITIVE);
    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut zero_slots = Vec::new();
    for &j in &idx {
        let s = sigma[j];
        if s > sigma_floor {
            u_cols.push(a[j].iter().map(|&x| x * (1.0 / s)).collect());
        } else {
            zero_slots.push(u_cols.len());
            u_cols.push(Vec::new());
        }
        v_cols.push(v[j].clone());
    }
    complete_orthonormal(&mut u_cols, &zero_slots, rows);
    sigma = idx
        .iter()
        .map(|&j| if sigma[j] > sigma_floor { sigma[j] } else { 0.0 })
        .collect();

    Ok(SvdResult {
        u: Matrix::from_columns(&u_cols)?,
        singular_values: sigma,
        v: Matrix::from_columns(&v_cols)?,
    })
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], phase: T, c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let ap = *xi;
        let aq = *yi * phase;
        *xi = ap * c - aq * s;
        *yi = ap * s + aq * c;
    }
}

fn sq_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Fills the empty slots with unit vectors orthogonal to every other column.
fn complete_orthonormal<T: Scalar>(cols: &mut [Vec<T>], slots: &[usize], dim: usize) {
    let mut candidate = 0usize;
    for &slot in slots {
        loop {
            assert!(candidate < dim, "ran out of completion candidates");
            let mut w = vec![T::ZERO; dim];
            w[candidate] = T::ONE;
            candidate += 1;
            // Two Gram-Schmidt passes.
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.is_empty() {
                        continue;
                    }
                    let proj = dot(c, &w);
                    for (wi, &ci) in w.iter_mut().zip(c) {
                        *wi = *wi - ci * proj;
                    }
                }
            }
            let nrm = sq_norm(&w).sqrt();
            if nrm > 0.5 {
                cols[slot] = w.into_iter().map(|x| x * (1.0 / nrm)).collect();
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, RealMatrix};
    use num_complex::Complex64;
    use rand::Rng;

    fn random_complex(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = crate::rng::rng_from_seed(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn check_contract<T: Scalar>(m: &Matrix<T>, r: &SvdResult<T>) {
        let rel = r.reconstruct().max_abs_diff(m);
        let recon = r.reconstruct();
        let diff: f64 = recon
            .as_slice()
            .iter()
            .zip(m.as_slice())
            .map(|(&a, &b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(
            diff / m.frobenius_norm() <= 1e-8,
            "round trip {diff} (max {rel})"
        );
        assert!(r.u.unitarity_error() <= 1e-8);
        assert!(r.v.unitarity_error() <= 1e-8);
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.singular_values.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let r = svd(&ComplexMatrix::identity(4)).unwrap();
        for s in &r.singular_values {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_is_recovered_with_identity_vectors() {
        let m = RealMatrix::from_fn(3, 3, |i, j| if i == j { [1.0, 3.0, 2.0][i] } else { 0.0 });
        let r = svd(&m).unwrap();
        assert_eq!(r.singular_values, vec![3.0, 2.0, 1.0]);
        // Columns are permuted unit vectors up to sign.
        for (j, &row) in [1usize, 2, 0].iter().enumerate() {
            assert!((r.u[(row, j)].abs() - 1.0).abs() < 1e-15);
            assert!((r.v[(row, j)].abs() - 1.0).abs() < 1e-15);
        }
        check_contract(&m, &r);
    }

    #[test]
    fn tall_wide_and_rank_deficient() {
        for &(rows, cols) in &[(8, 8), (12, 5), (5, 12), (1, 7), (7, 1)] {
            let m = random_complex(rows, cols, (rows * 31 + cols) as u64);
            check_contract(&m, &svd(&m).unwrap());
        }
        // Rank 2 product of thin factors.
        let a = random_complex(10, 2, 1);
        let b = random_complex(2, 9, 2);
        let m = a.matmul(&b).unwrap();
        let r = svd(&m).unwrap();
        check_contract(&m, &r);
        assert!(r.singular_values[2..].iter().all(|&s| s < 1e-12));
    }

    #[test]
    fn zero_matrix() {
        let m = ComplexMatrix::zeros(4, 3);
        let r = svd(&m).unwrap();
        assert!(r.singular_values.iter().all(|&s| s == 0.0));
        assert!(r.u.unitarity_error() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = RealMatrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(svd(&m).is_err());
    }
}
