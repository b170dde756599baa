//! Epoching and per-epoch moment estimation.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::series::TimeSeries;

/// Contiguous, non-overlapping epochs covering a prefix of `[0, T)`.
///
/// Stored as `n + 1` strictly increasing edges starting at 0; epoch `i` is
/// `edges[i]..edges[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoching {
    edges: Vec<usize>,
}

impl Epoching {
    pub fn from_edges(edges: Vec<usize>) -> Result<Self> {
        if edges.len() < 2 || edges[0] != 0 {
            return Err(Error::InvalidInput("epoch edges must start at 0 and define at least one epoch".into()));
        }
        for (i, w) in edges.windows(2).enumerate() {
            if w[1] < w[0] + 2 {
                return Err(Error::DegenerateEpoch { epoch: i, len: w[1].saturating_sub(w[0]) });
            }
        }
        Ok(Epoching { edges })
    }

    /// `n_epochs` epochs of `len` samples each.
    pub fn fixed_length(n_epochs: usize, len: usize) -> Result<Self> {
        if n_epochs == 0 {
            return Err(Error::InvalidInput("need at least one epoch".into()));
        }
        Self::from_edges((0..=n_epochs).map(|i| i * len).collect())
    }

    pub fn n_epochs(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_boundaries(&self) -> usize {
        self.n_epochs() - 1
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.edges[i]..self.edges[i + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.edges.windows(2).map(|w| w[0]..w[1])
    }

    /// End of the covered prefix.
    pub fn end(&self) -> usize {
        *self.edges.last().expect("non-empty edges")
    }

    /// Sample indices at which epoch `i + 1` starts, for `i` in `0..n-1`.
    pub fn boundaries(&self) -> &[usize] {
        &self.edges[1..self.edges.len() - 1]
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn check_fits(&self, series: &TimeSeries) -> Result<()> {
        if self.end() > series.n_samples() {
            return Err(Error::InvalidInput(format!(
                "epoching covers {} samples but series has {}",
                self.end(),
                series.n_samples()
            )));
        }
        Ok(())
    }
}

/// Splits a series into `n_epochs` equal epochs; trailing samples that do not
/// fill a whole epoch are dropped.
pub fn make_epochs(series: &TimeSeries, n_epochs: usize) -> Result<Epoching> {
    make_epochs_for_len(series.n_samples(), n_epochs)
}

pub fn make_epochs_for_len(n_samples: usize, n_epochs: usize) -> Result<Epoching> {
    if n_epochs < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 epochs, got {n_epochs}")));
    }
    if n_samples < 2 * n_epochs {
        return Err(Error::TooFewSamples { samples: n_samples, epochs: n_epochs });
    }
    Epoching::fixed_length(n_epochs, n_samples / n_epochs)
}

/// Per-epoch sample means, unbiased covariances and sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochStats {
    #[serde(with = "crate::serde_mat::vectors")]
    pub means: Vec<DVector<f64>>,
    #[serde(with = "crate::serde_mat::vec")]
    pub covariances: Vec<DMatrix<f64>>,
    pub counts: Vec<usize>,
}

impl EpochStats {
    pub fn new(
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
        counts: Vec<usize>,
    ) -> Result<Self> {
        let stats = EpochStats { means, covariances, counts };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.means.len();
        if n == 0 || self.covariances.len() != n || self.counts.len() != n {
            return Err(Error::InvalidInput("epoch stats lists must be non-empty and of equal length".into()));
        }
        let dim = self.dim();
        for (i, (m, c)) in self.means.iter().zip(&self.covariances).enumerate() {
            if m.len() != dim || c.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: m.len().max(c.nrows()) });
            }
            let scale = c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if (c - c.transpose()).iter().any(|v| v.abs() > 1e-10 * scale) {
                return Err(Error::InvalidInput(format!("covariance of epoch {i} is not symmetric")));
            }
        }
        if let Some(i) = self.counts.iter().position(|&c| c == 0) {
            return Err(Error::DegenerateEpoch { epoch: i, len: 0 });
        }
        Ok(())
    }

    pub fn n_epochs(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn average_mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for m in &self.means {
            acc += m;
        }
        acc / self.n_epochs() as f64
    }

    pub fn average_covariance(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut acc = DMatrix::zeros(dim, dim);
        for c in &self.covariances {
            acc += c;
        }
        acc / self.n_epochs() as f64
    }

    pub fn equal_counts(&self) -> bool {
        self.counts.windows(2).all(|w| w[0] == w[1])
    }
}

/// Sample mean and unbiased (divisor `|T_i| - 1`) covariance of every epoch.
pub fn epoch_stats(series: &TimeSeries, epochs: &Epoching) -> Result<EpochStats> {
    epochs.check_fits(series)?;
    let data = series.data();
    let dim = series.n_channels();
    let mut means = Vec::with_capacity(epochs.n_epochs());
    let mut covs = Vec::with_capacity(epochs.n_epochs());
    let mut counts = Vec::with_capacity(epochs.n_epochs());
    for (i, r) in epochs.ranges().enumerate() {
        let len = r.len();
        if len < 2 {
            return Err(Error::DegenerateEpoch { epoch: i, len });
        }
        let block = data.columns(r.start, len);
        let mean = block.column_mean();
        let mut centered = block.into_owned();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let cov = (&centered * centered.transpose()) / (len - 1) as f64;
        debug_assert_eq!(cov.nrows(), dim);
        means.push(mean);
        covs.push(symmetrize(&cov));
        counts.push(len);
    }
    EpochStats::new(means, covs, counts)
}

/// Stats of the projected signal `B x`: `{B mu_i, B Sigma_i B^T, N_i}`.
pub fn transform_stats(stats: &EpochStats, projection: &DMatrix<f64>) -> Result<EpochStats> {
    if projection.ncols() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), got: projection.ncols() });
    }
    if projection.nrows() == 0 || projection.nrows() > projection.ncols() {
        return Err(Error::InvalidInput(format!(
            "projection must have 1..={} rows, got {}",
            projection.ncols(),
            projection.nrows()
        )));
    }
    let bt = projection.transpose();
    Ok(EpochStats {
        means: stats.means.iter().map(|m| projection * m).collect(),
        covariances: stats
            .covariances
            .iter()
            .map(|c| symmetrize(&(projection * c * &bt)))
            .collect(),
        counts: stats.counts.clone(),
    })
}
