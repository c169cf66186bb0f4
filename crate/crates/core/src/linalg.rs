//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigenvalue(m: &Matrix) -> Result<f64> {
    if !m.is_square() || m.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "symmetric eigenproblem".into(),
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let eig = SymmetricEigen::new(m.clone());
    Ok(eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v)))
}

/// Returns `c` if `m` equals `c * I` up to `tol` (absolute, entrywise).
pub fn scalar_identity_coefficient(m: &Matrix, tol: f64) -> Option<f64> {
    if !m.is_square() || m.is_empty() {
        return None;
    }
    let c = m[(0, 0)];
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let target = if i == j { c } else { 0.0 };
            if (m[(i, j)] - target).abs() > tol {
                return None;
            }
        }
    }
    Some(c)
}

pub fn is_identity(m: &Matrix, tol: f64) -> bool {
    scalar_identity_coefficient(m, tol).is_some_and(|c| (c - 1.0).abs() <= tol)
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Factorization(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        Cholesky::new(m.clone())
            .map(|chol| SpdFactor { chol })
            .ok_or_else(|| Error::Factorization("matrix is not positive definite".into()))
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        self.chol.solve(rhs)
    }

    pub fn solve_matrix(&self, rhs: &Matrix) -> Matrix {
        self.chol.solve(rhs)
    }
}

pub(crate) fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_eigenvalue() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((sym_min_eigenvalue(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_scaled_identity() {
        let m = Matrix::identity(3, 3) * 2.5;
        assert_eq!(scalar_identity_coefficient(&m, 1e-14), Some(2.5));
        let mut n = m.clone();
        n[(0, 1)] = 1e-3;
        assert_eq!(scalar_identity_coefficient(&n, 1e-14), None);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(SpdFactor::new(&m).is_err());
        let f = SpdFactor::new(&(Matrix::identity(2, 2) * 4.0)).unwrap();
        let x = f.solve(&Vector::from_vec(vec![4.0, 8.0]));
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }
}
