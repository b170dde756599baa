//! Hold-out stationarity check against a time-permutation baseline, and the
//! cumulative standardized excess (BNISE) built from it.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lrt::normalized;
use crate::epochs::{epoch_stats, make_epochs, transform_stats, EpochStats};
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::ssa::{fit_s_projection, ssa_objective, SsaConfig};
use crate::whitening::{fit_whitening, WhiteningTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoldoutConfig {
    /// Epochs per half of the series.
    pub n_epochs: usize,
    pub n_permutations: usize,
    pub seed: u64,
    pub ssa: SsaConfig,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        HoldoutConfig { n_epochs: 15, n_permutations: 20, seed: 0, ssa: SsaConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutCheck {
    pub d_s: usize,
    /// Loss of the first-half s-projection on the second half.
    pub loss: f64,
    pub permuted_mean: f64,
    pub permuted_std: f64,
    pub permuted: Vec<f64>,
}

impl HoldoutCheck {
    /// `(loss - mean) / std`, undefined when the permutation spread is zero.
    pub fn z_score(&self) -> Option<f64> {
        (self.permuted_std > 0.0).then(|| (self.loss - self.permuted_mean) / self.permuted_std)
    }
}

/// Loss of `projection` (whitened by `whitening`) on raw epoch stats, after
/// re-whitening inside the projected space.
fn heldout_loss(raw: &EpochStats, whitening: &WhiteningTransform, projection: &DMatrix<f64>) -> Result<f64> {
    let projected = normalized(&transform_stats(&whitening.apply_stats(raw)?, projection)?)?;
    let d = projection.nrows();
    ssa_objective(&projected, &DMatrix::identity(d, d))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fits the s-projection on the first half for every candidate `d_s`, then
/// compares its loss on the second half with the same loss on
/// `n_permutations` time-permuted copies of the series.
pub fn holdout_stationarity_check(
    series: &TimeSeries,
    candidates: &[usize],
    config: &HoldoutConfig,
) -> Result<Vec<HoldoutCheck>> {
    if config.n_permutations == 0 {
        return Err(Error::Config("need at least one permutation".into()));
    }
    let half = series.n_samples() / 2;
    let first = series.slice(0, half)?;
    let second = series.slice(half, series.n_samples())?;
    let epochs_first = make_epochs(&first, config.n_epochs)?;
    let epochs_second = make_epochs(&second, config.n_epochs)?;

    let raw_first = epoch_stats(&first, &epochs_first)?;
    let whitening = fit_whitening(&raw_first)?;
    let white_first = whitening.apply_stats(&raw_first)?;
    let raw_second = epoch_stats(&second, &epochs_second)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut permuted_stats = Vec::with_capacity(config.n_permutations);
    for _ in 0..config.n_permutations {
        let mut perm: Vec<usize> = (0..series.n_samples()).collect();
        perm.shuffle(&mut rng);
        let shuffled = series.permute_time(&perm)?;
        let tail = shuffled.slice(half, series.n_samples())?;
        permuted_stats.push(epoch_stats(&tail, &epochs_second)?);
    }

    candidates
        .par_iter()
        .map(|&d_s| {
            let cfg = SsaConfig { d_s, ..config.ssa.clone() };
            let fit = fit_s_projection(&white_first, &cfg)?;
            let loss = heldout_loss(&raw_second, &whitening, &fit.projection)?;
            let permuted = permuted_stats
                .iter()
                .map(|s| heldout_loss(s, &whitening, &fit.projection))
                .collect::<Result<Vec<f64>>>()?;
            let (permuted_mean, permuted_std) = mean_std(&permuted);
            Ok(HoldoutCheck { d_s, loss, permuted_mean, permuted_std, permuted })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BniseReport {
    /// `per_d[k]` is BNISE(k + 1); `None` once a term is undefined.
    pub per_d: Vec<Option<f64>>,
    pub n_permutations: usize,
    pub seed: u64,
    pub checks: Vec<HoldoutCheck>,
}

impl BniseReport {
    pub fn value(&self, d: usize) -> Option<f64> {
        d.checked_sub(1).and_then(|k| self.per_d.get(k).copied().flatten())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,bnise\n");
        for (k, v) in self.per_d.iter().enumerate() {
            match v {
                Some(v) => out.push_str(&format!("{},{v}\n", k + 1)),
                None => out.push_str(&format!("{},\n", k + 1)),
            }
        }
        out
    }
}

/// `BNISE(d) = sum_{d' < d} z(d')` for `d = 1..=up_to_d`, with `z` the
/// standardized hold-out excess of [`holdout_stationarity_check`].
pub fn bnise(series: &TimeSeries, up_to_d: usize, config: &HoldoutConfig) -> Result<BniseReport> {
    let dim = series.n_channels();
    if up_to_d == 0 || up_to_d > dim {
        return Err(Error::Config(format!("up_to_d must lie in 1..={dim}, got {up_to_d}")));
    }
    let candidates: Vec<usize> = (1..up_to_d).collect();
    let checks = holdout_stationarity_check(series, &candidates, config)?;
    let mut per_d = Vec::with_capacity(up_to_d);
    let mut acc = Some(0.0);
    per_d.push(acc);
    for c in &checks {
        acc = match (acc, c.z_score()) {
            (Some(a), Some(z)) => Some(a + z),
            _ => None,
        };
        per_d.push(acc);
    }
    Ok(BniseReport { per_d, n_permutations: config.n_permutations, seed: config.seed, checks })
}

/// First candidate whose permutation spread is zero, as an error.
pub fn check_defined(report: &BniseReport) -> Result<()> {
    match report.checks.iter().find(|c| c.z_score().is_none()) {
        Some(c) => Err(Error::DegenerateBaseline(c.d_s)),
        None => Ok(()),
    }
}
