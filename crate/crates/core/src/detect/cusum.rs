//! Weighted CUSUM for variance changes in a univariate stream.

use serde::{Deserialize, Serialize};

use super::report::{ChangePointReport, DetectorKind};
use crate::epochs::Epoching;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Arithmetic grid of candidate post-change variances `start + i * step`.
///
/// With `relative` set, `start` and `step` are multiples of the mean square
/// of the whole (centred) series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    pub start: f64,
    pub step: f64,
    pub points: usize,
    pub relative: bool,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid { start: 0.2, step: 0.2, points: 25, relative: true }
    }
}

impl ThetaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0) || !(self.step > 0.0) || !self.start.is_finite() || !self.step.is_finite() {
            return Err(Error::Config("cusum theta grid values must be positive".into()));
        }
        if self.points == 0 {
            return Err(Error::Config("cusum theta grid needs at least one point".into()));
        }
        Ok(())
    }

    /// Grid values and the weighting constant `b` for a series scale.
    pub fn resolve(&self, scale: f64) -> (Vec<f64>, f64) {
        let s = if self.relative { scale } else { 1.0 };
        let values = (0..self.points).map(|i| s * (self.start + i as f64 * self.step)).collect();
        (values, s * self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CusumConfig {
    pub window: usize,
    /// Alarm threshold `h` on `ln Λ̃`; the trade-off parameter.
    pub threshold: f64,
    pub theta_grid: ThetaGrid,
}

impl Default for CusumConfig {
    fn default() -> Self {
        CusumConfig { window: 100, threshold: 10.0, theta_grid: ThetaGrid::default() }
    }
}

impl CusumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config("cusum window must be at least 2".into()));
        }
        if self.threshold.is_nan() {
            return Err(Error::Config("cusum threshold must not be NaN".into()));
        }
        self.theta_grid.validate()
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        CusumConfig { threshold, ..self.clone() }
    }
}

/// Log likelihood of `n` zero-mean Gaussian samples with sum of squares
/// `sum_sq` under variance `theta`, without the `2π` term.
fn zero_mean_loglik(sum_sq: f64, n: f64, theta: f64) -> f64 {
    -0.5 * n * theta.ln() - 0.5 * sum_sq / theta
}

/// `ln Λ̃ = -ln b + ln Σ_i p_θi(y) / p_θ0(y)` for one window.
pub fn window_log_ratio(window: &[f64], theta0: f64, grid: &[f64], weight: f64) -> f64 {
    let n = window.len() as f64;
    let sum_sq: f64 = window.iter().map(|v| v * v).sum();
    let base = zero_mean_loglik(sum_sq, n, theta0);
    let terms: Vec<f64> = grid.iter().map(|&t| zero_mean_loglik(sum_sq, n, t) - base).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    -weight.ln() + lse
}

fn mean_square(xs: &[f64]) -> f64 {
    xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64
}

/// Result of one sequential pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumRun {
    /// Sample indices at which an alarm was raised.
    pub alarms: Vec<usize>,
    pub report: ChangePointReport,
}

/// Score assigned to boundaries that no evaluated window mapped to.
pub const UNSCORED: f64 = f64::MIN;

/// Runs the sequential detector over a single-channel series.
///
/// Each window is attributed to the first epoch boundary at or after its
/// first sample. A boundary's score is the largest `ln Λ̃` attributed to it,
/// and it is flagged when one of its windows raised an alarm, so flags are
/// exactly `score >= h`.
pub fn cusum_run(series: &TimeSeries, epochs: &Epoching, config: &CusumConfig) -> Result<CusumRun> {
    if series.n_channels() != 1 {
        return Err(Error::Arity("cusum", series.n_channels()));
    }
    config.validate()?;
    epochs.check_fits(series)?;
    let w = config.window;
    let t_len = series.n_samples();
    if t_len <= w {
        return Err(Error::TooFewSamples { samples: t_len, epochs: epochs.n_epochs() });
    }
    let raw = series.data().row(0);
    let mean = raw.mean();
    let x: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let scale = mean_square(&x);
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("cusum input has zero variance".into()));
    }
    let (grid, weight) = config.theta_grid.resolve(scale);
    let floor = scale * 1e-12;

    let positions = epochs.boundaries();
    let mut scores = vec![UNSCORED; positions.len()];
    let mut alarms = Vec::new();
    let mut theta0 = mean_square(&x[..w]).max(floor);
    let mut t = w;
    while t < t_len {
        let start = t + 1 - w;
        let ll = window_log_ratio(&x[start..=t], theta0, &grid, weight);
        let target = positions.partition_point(|&p| p < start);
        if target < scores.len() && ll > scores[target] {
            scores[target] = ll;
        }
        if ll >= config.threshold {
            alarms.push(t);
            t += w;
            if t >= t_len {
                break;
            }
            theta0 = mean_square(&x[t + 1 - w..=t]).max(floor);
        }
        t += 1;
    }
    let boundaries = scores.iter().map(|&s| s != UNSCORED && s >= config.threshold).collect();
    Ok(CusumRun {
        alarms,
        report: ChangePointReport {
            detector: DetectorKind::Cusum,
            tau: config.threshold,
            boundaries,
            scores,
            sigma: None,
        },
    })
}

pub fn cusum_detect(series: &TimeSeries, epochs: &Epoching, config: &CusumConfig) -> Result<ChangePointReport> {
    Ok(cusum_run(series, epochs, config)?.report)
}
