//! Small shared wrappers around nalgebra for the Leontief-style solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::tol;

/// Power-iteration estimate of the spectral radius of a nonnegative matrix.
/// Exact for primitive matrices; decays to 0 for nilpotent (triangular)
/// ones, which is the right answer there too.
pub fn spectral_radius_estimate(m: &Mat) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let a = m.to_dmatrix();
    let mut v = DVector::from_element(n, 1.0);
    let mut est = 0.0;
    for _ in 0..tol::POWER_ITERATIONS {
        let w = &a * &v;
        let norm = w.amax();
        if norm == 0.0 || !norm.is_finite() {
            return norm;
        }
        est = norm;
        v = w / norm;
    }
    est
}

/// Check that `I - m` supports a convergent Neumann series (spectral radius
/// of `m` strictly below 1), erring with `context` otherwise.
pub fn require_neumann(m: &Mat, context: &str) -> Result<()> {
    let rho = spectral_radius_estimate(m);
    if rho < tol::SPECTRAL_RADIUS_MAX {
        Ok(())
    } else {
        Err(Error::Singular(format!(
            "{context}: spectral radius estimate {rho} is not below 1"
        )))
    }
}

/// Solve `(I - m) x = rhs`.
pub fn solve_i_minus(m: &Mat, rhs: &[f64], context: &str) -> Result<Vec<f64>> {
    let n = m.rows();
    let a = DMatrix::identity(n, n) - m.to_dmatrix();
    let lu = a.lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular(format!("{context}: I - matrix is singular")))
}

/// Solve the row system `y (I - m) = rhs`, i.e. `(I - m)^T y = rhs`.
pub fn solve_i_minus_transpose(m: &Mat, rhs: &[f64], context: &str) -> Result<Vec<f64>> {
    let n = m.rows();
    let a = (DMatrix::identity(n, n) - m.to_dmatrix()).transpose();
    let lu = a.lu();
    lu.solve(&DVector::from_column_slice(rhs))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular(format!("{context}: I - matrix is singular")))
}

/// Full inverse of `I - m`.
pub fn invert_i_minus(m: &Mat, context: &str) -> Result<Mat> {
    let n = m.rows();
    let a = DMatrix::identity(n, n) - m.to_dmatrix();
    a.try_inverse()
        .map(|inv| Mat::from_dmatrix(&inv))
        .ok_or_else(|| Error::Singular(format!("{context}: I - matrix is singular")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_of_scaled_identity() {
        let m = Mat::from_rows(2, 2, vec![0.5, 0.0, 0.0, 0.25]);
        let rho = spectral_radius_estimate(&m);
        assert!((rho - 0.5).abs() < 1e-9, "rho = {rho}");
    }

    #[test]
    fn nilpotent_matrix_has_zero_radius() {
        let m = Mat::from_rows(2, 2, vec![0.0, 0.9, 0.0, 0.0]);
        assert_eq!(spectral_radius_estimate(&m), 0.0);
        require_neumann(&m, "test").unwrap();
    }

    #[test]
    fn solve_matches_neumann_series() {
        let m = Mat::from_rows(2, 2, vec![0.2, 0.1, 0.3, 0.4]);
        let x = solve_i_minus(&m, &[1.0, 2.0], "test").unwrap();
        // Neumann: x = sum_k m^k rhs.
        let dm = m.to_dmatrix();
        let mut acc = DVector::from_column_slice(&[1.0, 2.0]);
        let mut term = acc.clone();
        for _ in 0..200 {
            term = &dm * &term;
            acc += &term;
        }
        assert!((x[0] - acc[0]).abs() < 1e-10);
        assert!((x[1] - acc[1]).abs() < 1e-10);
    }

    #[test]
    fn transpose_solve_is_row_solve() {
        let m = Mat::from_rows(2, 2, vec![0.2, 0.1, 0.3, 0.4]);
        let y = solve_i_minus_transpose(&m, &[1.0, 1.0], "test").unwrap();
        // y (I - m) should reproduce the rhs.
        let recon0 = y[0] * (1.0 - 0.2) + y[1] * (-0.3);
        let recon1 = y[0] * (-0.1) + y[1] * (1.0 - 0.4);
        assert!((recon0 - 1.0).abs() < 1e-12);
        assert!((recon1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_errors() {
        let m = Mat::from_rows(1, 1, vec![1.0]);
        assert!(solve_i_minus(&m, &[1.0], "test").is_err());
        assert!(invert_i_minus(&m, "test").is_err());
    }
}
