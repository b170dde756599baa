//! The non-stationarity loss `sum_i [-log det(B S_i B^T) + |B m_i|^2]` and its
//! gradient with respect to the rotation parameterization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::rotation::RotationParam;
use crate::epochs::EpochStats;
use crate::error::{Error, Result};
use crate::linalg::{inverse_floored, logdet_floored, logdet_spd, symmetrize};

/// Whether the projection is chosen to minimize (stationary sources) or
/// maximize (most non-stationary sources) the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Minimize,
    Maximize,
}

impl Mode {
    pub(crate) fn sign(self) -> f64 {
        match self {
            Mode::Minimize => 1.0,
            Mode::Maximize => -1.0,
        }
    }

    /// `true` if `a` is strictly better than `b`.
    pub(crate) fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Minimize => a < b,
            Mode::Maximize => a > b,
        }
    }
}

fn check_projection(stats: &EpochStats, projection: &DMatrix<f64>) -> Result<()> {
    if projection.ncols() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), got: projection.ncols() });
    }
    Ok(())
}

/// Loss of a projection with orthonormal rows on whitened epoch stats.
///
/// Fails when a projected covariance is not positive definite.
pub fn ssa_objective(stats: &EpochStats, projection: &DMatrix<f64>) -> Result<f64> {
    check_projection(stats, projection)?;
    let bt = projection.transpose();
    let mut total = 0.0;
    for (i, (m, c)) in stats.means.iter().zip(&stats.covariances).enumerate() {
        let pc = symmetrize(&(projection * c * &bt));
        let ld = logdet_spd(&pc).map_err(|_| Error::NotSpd {
            context: Some(format!("projected covariance of epoch {i}")),
        })?;
        total += -ld + (projection * m).norm_squared();
    }
    Ok(total)
}

/// Loss and gradient at `M = 0` of `f(M) = sign * loss(top-d rows of exp(M) R)`.
pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: RotationParam,
    pub degenerate: bool,
}

/// Loss with eigenvalue-floored `log det`; the flag reports clamping.
pub(crate) fn loss_floored(stats: &EpochStats, projection: &DMatrix<f64>) -> (f64, bool) {
    let bt = projection.transpose();
    let mut total = 0.0;
    let mut degenerate = false;
    for (m, c) in stats.means.iter().zip(&stats.covariances) {
        let pc = symmetrize(&(projection * c * &bt));
        let (ld, flagged) = logdet_floored(&pc);
        degenerate |= flagged;
        total += -ld + (projection * m).norm_squared();
    }
    (total, degenerate)
}

pub(crate) fn evaluate(stats: &EpochStats, rotation: &DMatrix<f64>, d: usize, mode: Mode) -> Evaluation {
    let dim = rotation.nrows();
    let b = rotation.rows(0, d).into_owned();
    let bt = b.transpose();
    let mut value = 0.0;
    let mut degenerate = false;
    // h = sum_i [ -2 P_i^-1 B S_i + 2 (B m_i) m_i^T ]  (d x D)
    let mut h = DMatrix::zeros(d, dim);
    for (m, c) in stats.means.iter().zip(&stats.covariances) {
        let bc = &b * c;
        let pc = symmetrize(&(&bc * &bt));
        let (ld, flagged) = logdet_floored(&pc);
        degenerate |= flagged;
        let bm = &b * m;
        value += -ld + bm.norm_squared();
        h -= inverse_floored(&pc) * &bc * 2.0;
        h += &bm * m.transpose() * 2.0;
    }
    // Euclidean gradient w.r.t. the top d rows of M is h R^T; the antisymmetric
    // gradient is G - G^T with G zero outside the top d rows.
    let g_top = h * rotation.transpose();
    let mut g = DMatrix::zeros(dim, dim);
    g.rows_mut(0, d).copy_from(&g_top);
    let anti = (&g - g.transpose()) * mode.sign();
    Evaluation { value, gradient: RotationParam::from_upper(&anti), degenerate }
}

/// Gradient of the signed loss (`loss` when minimizing, `-loss` when
/// maximizing) with respect to the antisymmetric parameter `M` of
/// `top-d rows of exp(M) R`, evaluated at `M = 0`.
///
/// `rotation` must be a `D x D` orthogonal matrix whose first `d` rows form
/// the current projection.
pub fn ssa_gradient(
    stats: &EpochStats,
    rotation: &DMatrix<f64>,
    d: usize,
    mode: Mode,
) -> Result<RotationParam> {
    if rotation.nrows() != rotation.ncols() || rotation.nrows() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), got: rotation.nrows() });
    }
    if d == 0 || d > stats.dim() {
        return Err(Error::Config(format!("projection dimension {d} out of range 1..={}", stats.dim())));
    }
    // Surface singular projections as errors rather than silently flooring.
    ssa_objective(stats, &rotation.rows(0, d).into_owned())?;
    Ok(evaluate(stats, rotation, d, mode).gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn unit_stats(n: usize, dim: usize) -> EpochStats {
        EpochStats::new(
            vec![DVector::zeros(dim); n],
            vec![DMatrix::identity(dim, dim); n],
            vec![10; n],
        )
        .unwrap()
    }

    #[test]
    fn unit_epochs_have_zero_loss_and_gradient() {
        let stats = unit_stats(4, 3);
        let b = DMatrix::from_row_slice(1, 3, &[0.6, 0.8, 0.0]);
        assert!(ssa_objective(&stats, &b).unwrap().abs() < 1e-15);
        let g = ssa_gradient(&stats, &DMatrix::identity(3, 3), 2, Mode::Minimize).unwrap();
        assert!(g.max_abs() < 1e-15);
    }

    #[test]
    fn scalar_log_example() {
        let stats = EpochStats::new(
            vec![DVector::zeros(2)],
            vec![DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))],
            vec![10],
        )
        .unwrap();
        let e1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!((ssa_objective(&stats, &e1).unwrap() + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn singular_projection_is_an_error() {
        let stats = EpochStats::new(
            vec![DVector::zeros(2)],
            vec![DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))],
            vec![10],
        )
        .unwrap();
        let e2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(matches!(ssa_objective(&stats, &e2), Err(Error::NotSpd { .. })));
        let (v, flagged) = loss_floored(&stats, &e2);
        assert!(flagged);
        assert!(v.is_finite());
    }
}
