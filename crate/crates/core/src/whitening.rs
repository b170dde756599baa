//! Centering and whitening so that the average epoch is `N(0, I)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::epochs::{transform_stats, EpochStats};
use crate::error::{Error, Result};
use crate::linalg::inv_sqrt_sym;
use crate::series::TimeSeries;

/// Affine map `x -> W (x - shift)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiteningTransform {
    #[serde(with = "crate::serde_mat::vector")]
    pub shift: DVector<f64>,
    #[serde(with = "crate::serde_mat")]
    pub matrix: DMatrix<f64>,
}

impl WhiteningTransform {
    pub fn identity(dim: usize) -> Self {
        WhiteningTransform { shift: DVector::zeros(dim), matrix: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply_stats(&self, stats: &EpochStats) -> Result<EpochStats> {
        if stats.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: stats.dim() });
        }
        let shifted = EpochStats {
            means: stats.means.iter().map(|m| m - &self.shift).collect(),
            covariances: stats.covariances.clone(),
            counts: stats.counts.clone(),
        };
        transform_stats(&shifted, &self.matrix)
    }

    pub fn apply_series(&self, series: &TimeSeries) -> Result<TimeSeries> {
        series.affine(&self.matrix, &self.shift)
    }

    /// Maps whitened coordinates back to the original space.
    pub fn unwhiten(&self, series: &TimeSeries) -> Result<TimeSeries> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or(Error::RankDeficient { min: 0.0, max: 0.0 })?;
        let back = series.affine(&inv, &DVector::zeros(self.dim()))?;
        let mut data = back.data().clone();
        for mut col in data.column_iter_mut() {
            col += &self.shift;
        }
        TimeSeries::new(data)
    }
}

/// Fits `shift = (1/n) sum mu_i` and `W = C^(-1/2)` with `C = (1/n) sum Sigma_i`,
/// so the transformed stats have zero average mean and identity average
/// covariance.
pub fn fit_whitening(stats: &EpochStats) -> Result<WhiteningTransform> {
    stats.validate()?;
    let shift = stats.average_mean();
    let matrix = inv_sqrt_sym(&stats.average_covariance())?;
    Ok(WhiteningTransform { shift, matrix })
}
