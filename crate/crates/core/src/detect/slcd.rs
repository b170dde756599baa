//! Single Linkage Clustering with symmetrized KL divergence (SLCD).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linkage::single_linkage_cluster;
use super::report::{ChangePointReport, DetectorKind};
use crate::divergence::symmetrized_with_inverses;
use crate::epochs::{epoch_stats, EpochStats, Epoching};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Relative ridge added to every epoch covariance before inversion.
pub const SLCD_RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlcdConfig {
    pub n_epochs: usize,
    /// Number of clusters; the trade-off parameter.
    pub k_clusters: usize,
}

impl Default for SlcdConfig {
    fn default() -> Self {
        SlcdConfig { n_epochs: 200, k_clusters: 5 }
    }
}

impl SlcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_epochs < 2 {
            return Err(Error::Config("slcd n_epochs must be at least 2".into()));
        }
        if self.k_clusters == 0 || self.k_clusters > self.n_epochs {
            return Err(Error::Config(format!(
                "slcd k_clusters must lie in 1..={}, got {}",
                self.n_epochs, self.k_clusters
            )));
        }
        Ok(())
    }
}

/// Pairwise symmetrized KL divergences between epoch Gaussians.
pub fn slcd_distance_matrix(stats: &EpochStats) -> Result<DMatrix<f64>> {
    stats.validate()?;
    let n = stats.n_epochs();
    let d = stats.dim();
    let inverses = stats
        .covariances
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ridge = SLCD_RIDGE * c.trace().max(0.0) / d as f64;
            let reg = c + DMatrix::identity(d, d) * ridge;
            reg.clone()
                .cholesky()
                .map(|ch| (reg, ch.inverse()))
                .ok_or_else(|| Error::NotSpd { context: Some(format!("epoch {i}")) })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let (lo, hi) = (i.min(j), i.max(j));
                    symmetrized_with_inverses(
                        &stats.means[lo],
                        &inverses[lo].0,
                        &inverses[lo].1,
                        &stats.means[hi],
                        &inverses[hi].0,
                        &inverses[hi].1,
                    )
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Clusters epochs and reports a change wherever neighbours disagree.
///
/// The score at boundary `i` is the distance between epochs `i` and `i + 1`.
pub fn slcd_detect(series: &TimeSeries, epochs: &Epoching, config: &SlcdConfig) -> Result<ChangePointReport> {
    if config.k_clusters == 0 || config.k_clusters > epochs.n_epochs() {
        return Err(Error::Config(format!(
            "slcd k_clusters must lie in 1..={}, got {}",
            epochs.n_epochs(),
            config.k_clusters
        )));
    }
    let stats = epoch_stats(series, epochs)?;
    let dist = slcd_distance_matrix(&stats)?;
    let labels = single_linkage_cluster(&dist, config.k_clusters)?;
    let n = stats.n_epochs();
    Ok(ChangePointReport {
        detector: DetectorKind::Slcd,
        tau: config.k_clusters as f64,
        boundaries: (0..n - 1).map(|i| labels[i] != labels[i + 1]).collect(),
        scores: (0..n - 1).map(|i| dist[(i, i + 1)]).collect(),
        sigma: None,
    })
}
