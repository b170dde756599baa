//! Stationary Subspace Analysis: projections that minimize (stationary
//! sources) or maximize (most non-stationary sources) the epoch-wise
//! divergence from the average epoch.

mod objective;
mod rotation;
mod solver;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use objective::{ssa_gradient, ssa_objective, Mode};
pub use rotation::{rotation_exp, RotationParam};
pub use solver::{fit_projection_from, initial_rotations, rotation_with_leading_rows, ProjectionFit, RestartSummary};

use crate::epochs::EpochStats;
use crate::error::{Error, Result};
use crate::linalg::orthogonal_complement;
use crate::series::TimeSeries;
use crate::whitening::{fit_whitening, WhiteningTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsaConfig {
    /// Number of stationary sources; the n-projection has `D - d_s` rows.
    pub d_s: usize,
    pub n_restarts: usize,
    pub max_iters: usize,
    /// Stop when the largest gradient entry falls below this.
    pub grad_tol: f64,
    /// Initial step, divided by the number of epochs.
    pub step_init: f64,
    pub seed: u64,
}

impl Default for SsaConfig {
    fn default() -> Self {
        SsaConfig { d_s: 1, n_restarts: 4, max_iters: 500, grad_tol: 1e-6, step_init: 1.0, seed: 0 }
    }
}

impl SsaConfig {
    pub fn with_d_s(mut self, d_s: usize) -> Self {
        self.d_s = d_s;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, n: usize) -> Self {
        self.n_restarts = n;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.d_s < 1 || self.d_s >= dim {
            return Err(Error::Config(format!("d_s must satisfy 1 <= d_s < D = {dim}, got {}", self.d_s)));
        }
        if self.n_restarts == 0 || self.max_iters == 0 {
            return Err(Error::Config("n_restarts and max_iters must be positive".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.step_init > 0.0) {
            return Err(Error::Config("grad_tol and step_init must be positive".into()));
        }
        Ok(())
    }

    pub fn d_n(&self, dim: usize) -> usize {
        dim - self.d_s
    }
}

/// Stationary projection of whitened stats: minimizes the loss over
/// `d_s`-row projections with orthonormal rows.
pub fn fit_s_projection(stats: &EpochStats, config: &SsaConfig) -> Result<ProjectionFit> {
    config.validate(stats.dim())?;
    let inits = initial_rotations(stats.dim(), config.n_restarts, config.seed);
    fit_projection_from(stats, config.d_s, Mode::Minimize, config, inits)
}

/// Most non-stationary projection of whitened stats: maximizes the loss over
/// `D - d_s`-row projections.
pub fn fit_n_projection(stats: &EpochStats, config: &SsaConfig) -> Result<ProjectionFit> {
    fit_n_projection_with(stats, config, None)
}

/// As [`fit_n_projection`], optionally adding a warm start whose leading rows
/// span `warm_start`.
pub fn fit_n_projection_with(
    stats: &EpochStats,
    config: &SsaConfig,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<ProjectionFit> {
    config.validate(stats.dim())?;
    let d_n = config.d_n(stats.dim());
    // Separate stream from the s-fit so the two searches do not share starts.
    let mut inits = initial_rotations(stats.dim(), config.n_restarts, config.seed ^ 0x9e37_79b9_7f4a_7c15);
    if let Some(rows) = warm_start {
        if rows.shape() != (d_n, stats.dim()) {
            return Err(Error::DimensionMismatch { expected: d_n, got: rows.nrows() });
        }
        inits.push(rotation_with_leading_rows(rows));
    }
    fit_projection_from(stats, d_n, Mode::Maximize, config, inits)
}

/// Fitted SSA model: whitening plus s- and n-projections in whitened
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemixingModel {
    pub whitening: WhiteningTransform,
    #[serde(with = "crate::serde_mat")]
    pub b_s: DMatrix<f64>,
    #[serde(with = "crate::serde_mat")]
    pub b_n: DMatrix<f64>,
    pub objective_s: f64,
    pub objective_n: f64,
}

/// Which group of estimated sources to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sources {
    Stationary,
    NonStationary,
}

impl DemixingModel {
    /// Whitens raw epoch stats, fits the s-projection, then the n-projection
    /// (warm-started from the orthogonal complement of the s-projection).
    pub fn fit(raw_stats: &EpochStats, config: &SsaConfig) -> Result<DemixingModel> {
        config.validate(raw_stats.dim())?;
        let whitening = fit_whitening(raw_stats)?;
        let white = whitening.apply_stats(raw_stats)?;
        let s = fit_s_projection(&white, config)?;
        let complement = orthogonal_complement(&s.projection);
        let n = fit_n_projection_with(&white, config, Some(&complement))?;
        Ok(DemixingModel {
            whitening,
            b_s: s.projection,
            b_n: n.projection,
            objective_s: s.objective,
            objective_n: n.objective,
        })
    }

    pub fn dim(&self) -> usize {
        self.whitening.dim()
    }

    pub fn projection(&self, which: Sources) -> &DMatrix<f64> {
        match which {
            Sources::Stationary => &self.b_s,
            Sources::NonStationary => &self.b_n,
        }
    }

    /// Estimated demixing matrix `[b_s; b_n]` in whitened coordinates.
    pub fn demixing(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut b = DMatrix::zeros(self.b_s.nrows() + self.b_n.nrows(), dim);
        b.rows_mut(0, self.b_s.nrows()).copy_from(&self.b_s);
        b.rows_mut(self.b_s.nrows(), self.b_n.nrows()).copy_from(&self.b_n);
        b
    }

    /// Estimated mixing matrix, the inverse of [`Self::demixing`].
    pub fn mixing(&self) -> Result<DMatrix<f64>> {
        let b = self.demixing();
        if b.nrows() != b.ncols() {
            return Err(Error::DimensionMismatch { expected: b.ncols(), got: b.nrows() });
        }
        b.try_inverse().ok_or(Error::RankDeficient { min: 0.0, max: 0.0 })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("b_s", &self.b_s), ("b_n", &self.b_n)] {
            if b.ncols() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: b.ncols() });
            }
            let gram = b * b.transpose() - DMatrix::identity(b.nrows(), b.nrows());
            if crate::linalg::max_abs(&gram) > 1e-8 {
                return Err(Error::InvalidInput(format!("{name} rows are not orthonormal")));
            }
        }
        Ok(())
    }
}

/// `b W (x(t) - shift)` for the chosen projection.
pub fn extract_sources(series: &TimeSeries, model: &DemixingModel, which: Sources) -> Result<TimeSeries> {
    if series.n_channels() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: series.n_channels() });
    }
    let m = model.projection(which) * &model.whitening.matrix;
    series.affine(&m, &model.whitening.shift)
}
