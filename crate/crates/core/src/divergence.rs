//! Closed-form Kullback-Leibler divergences between Gaussians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_dims(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    if cov.shape() != (mean.len(), mean.len()) {
        return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.nrows() });
    }
    Ok(())
}

/// `KL[N(mean, cov) || N(0, I)] = 1/2 (tr cov + |mean|^2 - d - log det cov)`.
pub fn kl_gauss_to_standard(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    check_dims(mean, cov)?;
    let chol = cov.clone().cholesky().ok_or(Error::NotSpd { context: None })?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let d = mean.len() as f64;
    Ok((0.5 * (cov.trace() + mean.norm_squared() - d - logdet)).max(0.0))
}

/// `KL[N(m_a, c_a) || N(m_b, c_b)]`.
pub fn kl_gauss(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    check_dims(mean_a, cov_a)?;
    check_dims(mean_b, cov_b)?;
    if mean_a.len() != mean_b.len() {
        return Err(Error::DimensionMismatch { expected: mean_a.len(), got: mean_b.len() });
    }
    let chol_a = cov_a.clone().cholesky().ok_or(Error::NotSpd { context: None })?;
    let chol_b = cov_b.clone().cholesky().ok_or(Error::NotSpd { context: None })?;
    let ld = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    };
    let diff = mean_b - mean_a;
    let trace = chol_b.solve(cov_a).trace();
    let maha = diff.dot(&chol_b.solve(&diff));
    let d = mean_a.len() as f64;
    Ok((0.5 * (trace + maha - d + ld(&chol_b) - ld(&chol_a))).max(0.0))
}

/// `1/2 KL(A||B) + 1/2 KL(B||A)`.
///
/// Evaluated in a form that is exactly symmetric in its arguments:
/// `1/4 (tr(B^-1 A) + tr(A^-1 B) - 2d + dm^T (A^-1 + B^-1) dm)`.
pub fn kl_gauss_symmetrized(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    check_dims(mean_a, cov_a)?;
    check_dims(mean_b, cov_b)?;
    if mean_a.len() != mean_b.len() {
        return Err(Error::DimensionMismatch { expected: mean_a.len(), got: mean_b.len() });
    }
    let inv_a = cov_a.clone().cholesky().ok_or(Error::NotSpd { context: None })?.inverse();
    let inv_b = cov_b.clone().cholesky().ok_or(Error::NotSpd { context: None })?.inverse();
    Ok(symmetrized_with_inverses(mean_a, cov_a, &inv_a, mean_b, cov_b, &inv_b))
}

/// Symmetrized KL from precomputed inverse covariances.
pub(crate) fn symmetrized_with_inverses(
    mean_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    inv_a: &DMatrix<f64>,
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
    inv_b: &DMatrix<f64>,
) -> f64 {
    let d = mean_a.len() as f64;
    // tr(X Y) for symmetric X, Y is the elementwise sum of products.
    let t_ab = inv_b.component_mul(cov_a).sum();
    let t_ba = inv_a.component_mul(cov_b).sum();
    let diff = mean_a - mean_b;
    let maha = diff.dot(&((inv_a + inv_b) * &diff));
    // Sum the two directions in a fixed order so swapping arguments is exact.
    let (lo, hi) = if t_ab <= t_ba { (t_ab, t_ba) } else { (t_ba, t_ab) };
    (0.25 * ((lo + hi) - 2.0 * d + maha)).max(0.0)
}
