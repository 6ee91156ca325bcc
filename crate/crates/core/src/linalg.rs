//! Small dense linear-algebra helpers shared by the fusion and feature code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue floor used when forming inverse square roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `S^{-1/2}` for a symmetric matrix via eigendecomposition, eigenvalues clamped at [`EIGEN_FLOOR`].
/// Fails if any eigenvalue is below `-tol`, i.e. the matrix is clearly not PSD.
pub fn inv_sqrt_sym(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(s.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if let Some(bad) = eig.eigenvalues.iter().find(|&&v| v < -1e-8 * scale || !v.is_finite()) {
        return Err(Error::numerical(format!("matrix is not positive definite (eigenvalue {bad:e})")));
    }
    let d = eig.eigenvalues.map(|v| 1.0 / v.max(EIGEN_FLOOR).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&d) * q.transpose())
}

/// Column means of a row-per-sample matrix.
pub fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    let m = x.nrows().max(1) as f64;
    x.column_iter().map(|c| c.sum() / m).collect()
}

/// Subtract column means.
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(x);
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}
