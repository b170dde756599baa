//! Likelihood-ratio test of `H0: every epoch ~ N(0, I)` against
//! `H_A: epoch i ~ N(mu_i, Sigma_i)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chi2::chi2_sf;
use crate::epochs::EpochStats;
use crate::error::{Error, Result};
use crate::linalg::{logdet_spd, max_abs, max_abs_vec};
use crate::whitening::fit_whitening;

const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityTest {
    /// `-2 log` likelihood ratio.
    pub lambda: f64,
    /// `N d (d + 3) / 2` for `N` epochs in `d` dimensions.
    pub dof: f64,
    pub p_value: f64,
}

impl StationarityTest {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Re-whitens stats unless the average epoch is already `N(0, I)` within tolerance.
pub fn normalized(stats: &EpochStats) -> Result<EpochStats> {
    let dim = stats.dim();
    let mean_ok = max_abs_vec(&stats.average_mean()) < NORMALIZATION_TOL;
    let cov_ok = max_abs(&(stats.average_covariance() - DMatrix::identity(dim, dim))) < NORMALIZATION_TOL;
    if mean_ok && cov_ok {
        Ok(stats.clone())
    } else {
        fit_whitening(stats)?.apply_stats(stats)
    }
}

struct EpochTerms {
    count: f64,
    /// log det of the maximum-likelihood covariance
    logdet_ml: f64,
    trace_ml: f64,
    mean_sq: f64,
}

fn epoch_terms(stats: &EpochStats) -> Result<Vec<EpochTerms>> {
    stats
        .means
        .iter()
        .zip(&stats.covariances)
        .zip(&stats.counts)
        .enumerate()
        .map(|(i, ((m, c), &n))| {
            let n = n as f64;
            let ml = c * ((n - 1.0) / n);
            let logdet_ml = logdet_spd(&ml).map_err(|_| Error::NotSpd {
                context: Some(format!("covariance of epoch {i}")),
            })?;
            Ok(EpochTerms { count: n, logdet_ml, trace_ml: ml.trace(), mean_sq: m.norm_squared() })
        })
        .collect()
}

/// `-2 log` of the likelihood ratio, from per-epoch Gaussian log-likelihoods
/// with ML parameters. The log-likelihoods are evaluated from the sufficient
/// statistics: `sum_t |x_t|^2 = N (tr Sigma_ML + |mu|^2)` per epoch.
fn direct_statistic(terms: &[EpochTerms], d: f64) -> f64 {
    let log2pi = (2.0 * std::f64::consts::PI).ln();
    let mut loglik_null = 0.0;
    let mut loglik_alt = 0.0;
    for t in terms {
        let sum_sq = t.count * (t.trace_ml + t.mean_sq);
        loglik_null += -0.5 * (t.count * d * log2pi + sum_sq);
        loglik_alt += -0.5 * t.count * (d * log2pi + t.logdet_ml + d);
    }
    -2.0 * (loglik_null - loglik_alt)
}

/// The simplified per-epoch sum `1/2 sum_i N_i (-log det Sigma_i + |mu_i|^2 + tr Sigma_i)`
/// (ML covariances), without any leading constant.
pub fn closed_form_sum(stats: &EpochStats) -> Result<f64> {
    Ok(epoch_terms(stats)?
        .iter()
        .map(|t| 0.5 * t.count * (-t.logdet_ml + t.mean_sq + t.trace_ml))
        .sum())
}

/// Likelihood-ratio stationarity test on (projected, whitened) stats.
///
/// Stats whose average epoch is not `N(0, I)` are re-whitened first.
pub fn likelihood_ratio_statistic(stats: &EpochStats) -> Result<StationarityTest> {
    let stats = normalized(stats)?;
    let d = stats.dim() as f64;
    let terms = epoch_terms(&stats)?;
    let lambda = direct_statistic(&terms, d);

    // Cross-check: lambda == 2 * closed_form - d * sum N_i.
    let closed: f64 = terms.iter().map(|t| 0.5 * t.count * (-t.logdet_ml + t.mean_sq + t.trace_ml)).sum();
    let total: f64 = terms.iter().map(|t| t.count).sum();
    let affine = 2.0 * closed - d * total;
    debug_assert!(
        (lambda - affine).abs() <= 1e-8 * (1.0 + lambda.abs()),
        "direct statistic {lambda} disagrees with closed form {affine}"
    );

    let dof = 0.5 * stats.n_epochs() as f64 * d * (d + 3.0);
    let lambda = lambda.max(0.0);
    Ok(StationarityTest { lambda, dof, p_value: chi2_sf(lambda, dof).clamp(0.0, 1.0) })
}
