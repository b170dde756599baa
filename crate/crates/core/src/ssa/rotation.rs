//! Antisymmetric parameterization of rotations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A `D x D` antisymmetric matrix stored as its strictly upper triangle
/// (row-major), so `M = -M^T` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationParam {
    dim: usize,
    upper: Vec<f64>,
}

impl RotationParam {
    pub fn zeros(dim: usize) -> Self {
        RotationParam { dim, upper: vec![0.0; dim * dim.saturating_sub(1) / 2] }
    }

    /// Reads the strictly upper triangle of `m`; the lower triangle is ignored.
    pub fn from_upper(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let mut upper = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
        for k in 0..dim {
            for l in k + 1..dim {
                upper.push(m[(k, l)]);
            }
        }
        RotationParam { dim, upper }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(k, l)` for `k < l`, in row-major upper-triangle order.
    pub fn entries(&self) -> &[f64] {
        &self.upper
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.upper
    }

    /// Iterates `(k, l, value)` over the strictly upper triangle.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let dim = self.dim;
        (0..dim)
            .flat_map(move |k| (k + 1..dim).map(move |l| (k, l)))
            .zip(self.upper.iter().copied())
            .map(|((k, l), v)| (k, l, v))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, l, v) in self.iter() {
            m[(k, l)] = v;
            m[(l, k)] = -v;
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        RotationParam { dim: self.dim, upper: self.upper.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Sum of squares over the free parameters (half the Frobenius norm squared).
    pub fn norm_squared(&self) -> f64 {
        self.upper.iter().map(|v| v * v).sum()
    }

    /// Inner product over the free parameters.
    pub fn dot(&self, other: &RotationParam) -> f64 {
        self.upper.iter().zip(&other.upper).map(|(a, b)| a * b).sum()
    }
}

/// `exp(M)` for antisymmetric `M`; the result is a rotation (orthogonal with
/// determinant +1).
pub fn rotation_exp(param: &RotationParam) -> DMatrix<f64> {
    if param.dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    param.to_matrix().exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_is_identity() {
        let r = rotation_exp(&RotationParam::zeros(4));
        assert!(max_abs(&(r - DMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn quarter_turn_2d() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -FRAC_PI_2, FRAC_PI_2, 0.0]);
        let p = RotationParam::from_upper(&m);
        assert_eq!(p.to_matrix(), m);
        let r = rotation_exp(&p);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(max_abs(&(r - expected)) < 1e-10);
    }

    #[test]
    fn upper_layout() {
        let mut p = RotationParam::zeros(3);
        p.entries_mut().copy_from_slice(&[1.0, 2.0, 3.0]);
        let m = p.to_matrix();
        assert_eq!((m[(0, 1)], m[(0, 2)], m[(1, 2)]), (1.0, 2.0, 3.0));
        assert_eq!(m, -m.transpose());
    }
}
