//! Epoch-aligned confusion counts and ROC curves.

use serde::{Deserialize, Serialize};

use crate::detect::ChangePointReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_).max(1) as f64
    }

    pub fn fpr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tn).max(1) as f64
    }
}

/// Counts a flag as a hit when a true boundary lies within `tolerance`
/// boundaries of it. With tolerance 0 this is the plain confusion matrix.
pub fn confusion_from_flags(flags: &[bool], truth: &[bool], tolerance: usize) -> Result<Confusion> {
    if flags.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: flags.len() });
    }
    let n = truth.len();
    let near = |set: &[bool], i: usize| {
        let lo = i.saturating_sub(tolerance);
        let hi = (i + tolerance).min(n.saturating_sub(1));
        (lo..=hi).any(|j| set[j])
    };
    let mut c = Confusion::default();
    for i in 0..n {
        match (flags[i], truth[i]) {
            (true, _) if near(truth, i) => c.tp += 1,
            (true, _) => c.fp += 1,
            (false, true) if !near(flags, i) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (false, true) => {}
        }
    }
    Ok(c)
}

pub fn confusion_at_boundaries(report: &ChangePointReport, truth: &[bool], tolerance: usize) -> Result<Confusion> {
    confusion_from_flags(&report.boundaries, truth, tolerance)
}

/// ROC curve sorted by false positive rate, with both endpoints present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Threshold per point; `None` for the added endpoints.
    pub tau_values: Vec<Option<f64>>,
    pub auc: f64,
}

fn class_counts(truth: &[bool]) -> Result<(u64, u64)> {
    let p = truth.iter().filter(|&&t| t).count() as u64;
    let n = truth.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::UndefinedRoc);
    }
    Ok((p, n))
}

/// Twice the trapezoidal area in units of `1 / (P N)`, so that the AUC of a
/// score ranking is an exact ratio of integers.
pub fn auc_numerator(scores: &[f64], truth: &[bool]) -> Result<(u64, u64)> {
    let (p, n) = class_counts(truth)?;
    let order = descending(scores, truth)?;
    let (mut tp, mut fp, mut num) = (0u64, 0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        num += (fp - fp0) * (tp + tp0);
    }
    Ok((num, 2 * p * n))
}

fn descending(scores: &[f64], truth: &[bool]) -> Result<Vec<usize>> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order)
}

/// Sweeps a threshold over every distinct score (flag when `score >= τ`).
pub fn roc_from_scores(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    let (p, n) = class_counts(truth)?;
    let order = descending(scores, truth)?;
    let mut points = vec![(0.0, 0.0)];
    let mut tau_values = vec![None];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
        tau_values.push(Some(s));
    }
    let (num, den) = auc_numerator(scores, truth)?;
    Ok(RocCurve { points, tau_values, auc: num as f64 / den as f64 })
}

/// Builds a curve from explicitly swept operating points, e.g. CUSUM alarm
/// thresholds where flags are not a function of one score ranking.
pub fn roc_from_operating_points(ops: &[(f64, Confusion)]) -> Result<RocCurve> {
    let mut pts: Vec<(f64, f64, Option<f64>)> = vec![(0.0, 0.0, None), (1.0, 1.0, None)];
    for (tau, c) in ops {
        if c.tp + c.fn_ == 0 || c.fp + c.tn == 0 {
            return Err(Error::UndefinedRoc);
        }
        pts.push((c.fpr(), c.tpr(), Some(*tau)));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    let auc = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    Ok(RocCurve {
        points: pts.iter().map(|p| (p.0, p.1)).collect(),
        tau_values: pts.iter().map(|p| p.2).collect(),
        auc,
    })
}
