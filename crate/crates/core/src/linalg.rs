//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenvalue floor used when a projected covariance is numerically singular.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `log det` of a symmetric positive definite matrix via Cholesky.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::NotSpd { context: None })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `log det` with eigenvalues clamped from below at [`EIGEN_FLOOR`].
/// The flag is set when clamping was needed.
pub fn logdet_floored(m: &DMatrix<f64>) -> (f64, bool) {
    if let Some(chol) = m.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        if diag.iter().all(|&v| v * v > EIGEN_FLOOR) {
            return (2.0 * diag.iter().map(|v| v.ln()).sum::<f64>(), false);
        }
    }
    let eig = symmetrize(m).symmetric_eigen();
    let clamped = eig.eigenvalues.iter().any(|&v| v < EIGEN_FLOOR);
    let ld = eig.eigenvalues.iter().map(|&v| v.max(EIGEN_FLOOR).ln()).sum();
    (ld, clamped)
}

/// Inverse of a symmetric matrix with eigenvalues floored at [`EIGEN_FLOOR`].
pub fn inverse_floored(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = m.clone().cholesky() {
        if chol.l_dirty().diagonal().iter().all(|&v| v * v > EIGEN_FLOOR) {
            return chol.inverse();
        }
    }
    let eig = symmetrize(m).symmetric_eigen();
    let inv = eig.eigenvalues.map(|v| 1.0 / v.max(EIGEN_FLOOR));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Symmetric inverse square root `M^(-1/2)`, rejecting rank-deficient input
/// (smallest eigenvalue below `1e-12` times the largest).
pub fn inv_sqrt_sym(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetrize(m).symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min < 1e-12 * max {
        return Err(Error::RankDeficient { min, max });
    }
    let d = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    Ok(symmetrize(
        &(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()),
    ))
}

/// Symmetric square root of a positive semi-definite matrix.
pub fn sqrt_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()))
}

/// Orthonormalize the rows of `m` (full row rank assumed), preserving the
/// row space and the orientation given by Gram-Schmidt order.
pub fn orthonormalize_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.transpose().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.transpose()
}

/// Haar-distributed `d x dim` matrix with orthonormal rows.
pub fn random_orthonormal_rows<R: Rng + ?Sized>(d: usize, dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    orthonormalize_rows(&g)
}

/// Orthonormal basis (as rows) of the orthogonal complement of the row space
/// of `b`, which must have orthonormal rows.
pub fn orthogonal_complement(b: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = b.ncols();
    let k = dim - b.nrows();
    if k == 0 {
        return DMatrix::zeros(0, dim);
    }
    let proj = DMatrix::<f64>::identity(dim, dim) - b.transpose() * b;
    let eig = symmetrize(&proj).symmetric_eigen();
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let mut out = DMatrix::zeros(k, dim);
    for (row, &i) in idx.iter().take(k).enumerate() {
        out.row_mut(row).copy_from(&eig.eigenvectors.column(i).transpose());
    }
    orthonormalize_rows(&out)
}

/// Principal angles (radians, ascending) between the row spaces of `a` and `b`.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormalize_rows(a);
    let qb = orthonormalize_rows(b);
    let s = (&qa * qb.transpose()).singular_values();
    let mut angles: Vec<f64> = s.iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
