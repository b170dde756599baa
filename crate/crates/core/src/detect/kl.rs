//! Kohlmorgen/Lemm segmentation: epochs are embedded as kernel density
//! estimates and a state sequence over those densities is fitted by dynamic
//! programming with a per-switch cost `C`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ChangePointReport, DetectorKind};
use crate::epochs::Epoching;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaRule {
    /// `scale` times the mean distance of a point to its `D` nearest neighbours.
    Auto { scale: f64 },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KlMode {
    Free,
    FixedChangepoints { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KohlLemmConfig {
    /// Samples per epoch used for the density estimate.
    pub window: usize,
    /// Epoch length when the detector builds its own epoching.
    pub separation: usize,
    pub sigma: SigmaRule,
    /// Switch cost `C`; the trade-off parameter.
    pub cost: f64,
    /// Interpret `cost` as a multiple of the median epoch distance.
    pub cost_relative: bool,
    pub mode: KlMode,
    /// Points of the log-spaced `C` grid behind the boundary scores.
    pub grid_points: usize,
}

impl Default for KohlLemmConfig {
    fn default() -> Self {
        KohlLemmConfig {
            window: 50,
            separation: 50,
            sigma: SigmaRule::Auto { scale: 1.0 },
            cost: 1.0,
            cost_relative: true,
            mode: KlMode::Free,
            grid_points: 32,
        }
    }
}

impl KohlLemmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("kl window must be positive".into()));
        }
        if self.separation < 2 {
            return Err(Error::Config("kl separation must be at least 2".into()));
        }
        match self.sigma {
            SigmaRule::Auto { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(Error::Config("kl sigma scale must be positive".into()))
            }
            SigmaRule::Fixed { value } if !(value > 0.0 && value.is_finite()) => {
                return Err(Error::Config("kl sigma must be positive".into()))
            }
            _ => {}
        }
        if !(self.cost >= 0.0) {
            return Err(Error::Config("kl cost must be non-negative".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("kl grid_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Non-overlapping epochs of `separation` samples.
    pub fn epoching_for(&self, n_samples: usize) -> Result<Epoching> {
        let n = n_samples / self.separation;
        if n < 2 {
            return Err(Error::TooFewSamples { samples: n_samples, epochs: 2 });
        }
        Epoching::fixed_length(n, self.separation)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean distance of each point to its `k` nearest neighbours within `points`.
pub(crate) fn mean_knn_distance(points: &[Vec<f64>], k: usize) -> f64 {
    let total: f64 = (0..points.len())
        .map(|q| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != q)
                .map(|(_, p)| sq_dist(&points[q], p))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            let mut near = d[..k].to_vec();
            near.sort_by(f64::total_cmp);
            near.iter().map(|v| v.sqrt()).sum::<f64>() / k as f64
        })
        .sum();
    total / points.len() as f64
}

/// Kernel width rule of thumb: mean distance of a point to its `D` nearest
/// neighbours, `D` being the number of channels.
///
/// Neighbours are searched within consecutive blocks of `window` samples, the
/// sample size of one density estimate; a trailing partial block is dropped.
pub fn kl_sigma_rule(series: &TimeSeries, window: usize) -> Result<f64> {
    let d = series.n_channels();
    let t = series.n_samples();
    let w = window.min(t);
    if w <= d {
        return Err(Error::TooFewSamples { samples: w, epochs: 1 });
    }
    let points: Vec<Vec<f64>> = series.data().column_iter().map(|c| c.iter().copied().collect()).collect();
    let blocks: Vec<f64> = points.par_chunks_exact(w).map(|chunk| mean_knn_distance(chunk, d)).collect();
    let sigma = blocks.iter().sum::<f64>() / blocks.len() as f64;
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput("sigma rule gave zero width; samples are identical".into()));
    }
    Ok(sigma)
}

fn kernel_sum(a: &DMatrix<f64>, b: &DMatrix<f64>, inv_four_sigma_sq: f64) -> f64 {
    let na: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    let nb: Vec<f64> = b.column_iter().map(|c| c.norm_squared()).collect();
    let cross = a.transpose() * b;
    let mut s = 0.0;
    for j in 0..b.ncols() {
        for i in 0..a.ncols() {
            let q = (na[i] + nb[j] - 2.0 * cross[(i, j)]).max(0.0);
            s += (-q * inv_four_sigma_sq).exp();
        }
    }
    s
}

fn density_norm(w: usize, d: usize, sigma: f64) -> f64 {
    1.0 / ((w * w) as f64 * (4.0 * std::f64::consts::PI * sigma * sigma).powf(d as f64 / 2.0))
}

/// Squared L2 distance between Gaussian kernel density estimates of two
/// sample sets (columns are samples).
pub fn kohlmorgen_lemm_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    if !(sigma > 0.0) {
        return Err(Error::Config("kernel width must be positive".into()));
    }
    let c = 1.0 / (4.0 * sigma * sigma);
    let raw = kernel_sum(a, a, c) - 2.0 * kernel_sum(a, b, c) + kernel_sum(b, b, c);
    Ok((density_norm(a.ncols(), a.nrows(), sigma) * raw).max(0.0))
}

/// `window` evenly strided samples of every epoch, as `D × W` blocks.
pub fn epoch_windows(series: &TimeSeries, epochs: &Epoching, window: usize) -> Result<Vec<DMatrix<f64>>> {
    epochs.check_fits(series)?;
    let w = epochs.ranges().map(|r| r.len()).min().unwrap_or(0).min(window);
    if w == 0 {
        return Err(Error::Config("kl window must be positive".into()));
    }
    Ok(epochs
        .ranges()
        .map(|r| {
            let len = r.len();
            let cols: Vec<usize> = (0..w).map(|j| r.start + j * len / w).collect();
            series.data().select_columns(cols.iter())
        })
        .collect())
}

/// Pairwise density distances between epoch windows.
pub fn kl_distance_matrix(windows: &[DMatrix<f64>], sigma: f64) -> Result<DMatrix<f64>> {
    let n = windows.len();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let shape = windows[0].shape();
    if let Some(bad) = windows.iter().find(|w| w.shape() != shape) {
        return Err(Error::DimensionMismatch { expected: shape.1, got: bad.ncols() });
    }
    if !(sigma > 0.0) {
        return Err(Error::Config("kernel width must be positive".into()));
    }
    let c = 1.0 / (4.0 * sigma * sigma);
    let norm = density_norm(shape.1, shape.0, sigma);
    let own: Vec<f64> = windows.par_iter().map(|w| kernel_sum(w, w, c)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| (norm * (own[i] - 2.0 * kernel_sum(&windows[i], &windows[j], c) + own[j])).max(0.0))
                .collect()
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            out[(i, i + 1 + k)] = v;
            out[(i + 1 + k, i)] = v;
        }
    }
    Ok(out)
}

/// Minimum-cost state sequence with cost `dist[(s, i)]` for explaining epoch
/// `i` by state `s` plus `cost` per switch.
pub fn kl_segment(dist: &DMatrix<f64>, cost: f64) -> Vec<usize> {
    let n = dist.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut prev: Vec<f64> = (0..n).map(|s| dist[(s, 0)]).collect();
    let mut switched = vec![vec![false; n]; n];
    let mut argmins = vec![0usize; n];
    for i in 1..n {
        let (best_s, best) = argmin(&prev);
        argmins[i - 1] = best_s;
        let jump = best + cost;
        let mut cur = vec![0.0; n];
        for s in 0..n {
            let (from, sw) = if prev[s] <= jump { (prev[s], false) } else { (jump, true) };
            cur[s] = dist[(s, i)] + from;
            switched[i][s] = sw;
        }
        prev = cur;
    }
    let mut states = vec![0usize; n];
    let mut s = argmin(&prev).0;
    for i in (0..n).rev() {
        states[i] = s;
        if i > 0 && switched[i][s] {
            s = argmins[i - 1];
        }
    }
    states
}

/// Minimum-cost state sequence with exactly `changes` switches between
/// distinct states.
pub fn kl_segment_fixed(dist: &DMatrix<f64>, changes: usize) -> Result<Vec<usize>> {
    let n = dist.nrows();
    if n == 0 || changes >= n {
        return Err(Error::Config(format!("cannot place {changes} change points among {n} epochs")));
    }
    let layers = changes + 1;
    let inf = f64::INFINITY;
    let mut prev = vec![vec![inf; n]; layers];
    for s in 0..n {
        prev[0][s] = dist[(s, 0)];
    }
    // parent[i][c][s]: state at epoch i - 1, for the path ending in s at i.
    let mut parent = vec![vec![vec![u32::MAX; n]; layers]; n];
    for i in 1..n {
        let mut cur = vec![vec![inf; n]; layers];
        for c in 0..layers {
            let two = (c > 0).then(|| best_two(&prev[c - 1]));
            for s in 0..n {
                let mut from = prev[c][s];
                let mut par = s;
                if let Some(((b1, v1), (b2, v2))) = two {
                    let (bs, bv) = if b1 != s { (b1, v1) } else { (b2, v2) };
                    if bv < from {
                        from = bv;
                        par = bs;
                    }
                }
                if from.is_finite() {
                    cur[c][s] = dist[(s, i)] + from;
                    parent[i][c][s] = par as u32;
                }
            }
        }
        prev = cur;
    }
    let (mut s, total) = argmin(&prev[changes]);
    if !total.is_finite() {
        return Err(Error::Config(format!("cannot place {changes} change points among {n} epochs")));
    }
    let mut c = changes;
    let mut states = vec![0usize; n];
    for i in (0..n).rev() {
        states[i] = s;
        if i > 0 {
            let p = parent[i][c][s] as usize;
            if p != s {
                c -= 1;
            }
            s = p;
        }
    }
    Ok(states)
}

fn argmin(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

fn best_two(v: &[f64]) -> ((usize, f64), (usize, f64)) {
    let mut first = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x < first.1 {
            second = first;
            first = (i, x);
        } else if x < second.1 {
            second = (i, x);
        }
    }
    (first, second)
}

fn state_changes(states: &[usize]) -> Vec<bool> {
    states.windows(2).map(|w| w[0] != w[1]).collect()
}

fn median_off_diagonal(dist: &DMatrix<f64>) -> f64 {
    let n = dist.nrows();
    let mut v: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist[(i, j)]).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Log-spaced switch costs from far below the smallest positive distance to
/// `n` times the largest, where a single state is always optimal.
pub fn kl_cost_grid(dist: &DMatrix<f64>, points: usize) -> Vec<f64> {
    let n = dist.nrows();
    let positive = dist.iter().copied().filter(|&v| v > 0.0);
    let min = positive.clone().fold(f64::INFINITY, f64::min);
    let max = positive.fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let lo = (1e-3 * min).ln();
    let hi = (n as f64 * max).ln();
    (0..points).map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp()).collect()
}

/// Per-boundary survival score: the largest grid cost at which the free
/// segmentation still switches there, or 0 when it never does.
pub fn kl_survival_scores(dist: &DMatrix<f64>, grid: &[f64]) -> Vec<f64> {
    let n = dist.nrows();
    let mut scores = vec![0.0; n.saturating_sub(1)];
    for &c in grid {
        for (b, flag) in state_changes(&kl_segment(dist, c)).into_iter().enumerate() {
            if flag && c > scores[b] {
                scores[b] = c;
            }
        }
    }
    scores
}

/// Runs the detector on a precomputed epoch distance matrix.
///
/// In free mode boundary `b` is flagged when its survival score is positive
/// and at least the switch cost, so flags nest as the cost grows. In fixed
/// mode the flags come from the exact-`N` segmentation and the scores are
/// the free-mode survival scores.
pub fn kl_detect_from_distances(dist: &DMatrix<f64>, config: &KohlLemmConfig, sigma: f64) -> Result<ChangePointReport> {
    config.validate()?;
    let grid = kl_cost_grid(dist, config.grid_points);
    let scores = kl_survival_scores(dist, &grid);
    let cost = if config.cost_relative { config.cost * median_off_diagonal(dist) } else { config.cost };
    let (tau, boundaries) = match config.mode {
        KlMode::Free => (cost, scores.iter().map(|&s| s > 0.0 && s >= cost).collect()),
        KlMode::FixedChangepoints { n } => (n as f64, state_changes(&kl_segment_fixed(dist, n)?)),
    };
    Ok(ChangePointReport { detector: DetectorKind::KohlmorgenLemm, tau, boundaries, scores, sigma: Some(sigma) })
}

pub fn resolve_sigma(series: &TimeSeries, rule: &SigmaRule, window: usize) -> Result<f64> {
    match *rule {
        SigmaRule::Auto { scale } => Ok(scale * kl_sigma_rule(series, window)?),
        SigmaRule::Fixed { value } => Ok(value),
    }
}

pub fn kohlmorgen_lemm_detect(
    series: &TimeSeries,
    epochs: &Epoching,
    config: &KohlLemmConfig,
) -> Result<ChangePointReport> {
    config.validate()?;
    let sigma = resolve_sigma(series, &config.sigma, config.window)?;
    let windows = epoch_windows(series, epochs, config.window)?;
    let dist = kl_distance_matrix(&windows, sigma)?;
    kl_detect_from_distances(&dist, config, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn single_sample_closed_form() {
        let (y, z, sigma) = (0.3, -1.1, 0.7);
        let got = kohlmorgen_lemm_distance(&row(&[y]), &row(&[z]), sigma).unwrap();
        let want = (4.0 * std::f64::consts::PI * sigma * sigma).powf(-0.5)
            * 2.0
            * (1.0 - (-(y - z) * (y - z) / (4.0 * sigma * sigma)).exp());
        assert!((got - want).abs() < 1e-12);
        assert_eq!(kohlmorgen_lemm_distance(&row(&[y, z]), &row(&[y, z]), sigma).unwrap(), 0.0);
    }

    #[test]
    fn sigma_rule_on_grid() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![0.25 * i as f64]).collect();
        let s = TimeSeries::from_samples(&xs).unwrap();
        assert!((kl_sigma_rule(&s, 50).unwrap() - 0.25).abs() < 1e-12);
        assert!((kl_sigma_rule(&s, 100).unwrap() - 0.25).abs() < 1e-12);
        let flat = TimeSeries::from_samples(&vec![vec![1.0]; 10]).unwrap();
        assert!(kl_sigma_rule(&flat, 5).is_err());
        assert!(kl_sigma_rule(&s, 1).is_err());
    }

    #[test]
    fn segmentation_extremes() {
        // Two groups of epochs: {0,1,2} and {3,4}.
        let pts: [f64; _] = [0.0, 0.0, 0.1, 5.0, 5.1];
        let dist = DMatrix::from_fn(5, 5, |i, j| (pts[i] - pts[j]).abs());
        let huge = kl_segment(&dist, 1e6);
        assert!(huge.iter().all(|&s| s == huge[0]));
        let zero = kl_segment(&dist, 0.0);
        assert_eq!(state_changes(&zero), vec![false, true, true, true]);
        let moderate = kl_segment(&dist, 1.0);
        assert_eq!(state_changes(&moderate), vec![false, false, true, false]);
        let fixed = kl_segment_fixed(&dist, 1).unwrap();
        assert_eq!(state_changes(&fixed), state_changes(&moderate));
        assert!(kl_segment_fixed(&dist, 5).is_err());
    }

    #[test]
    fn fixed_mode_counts_changes() {
        let pts: [f64; _] = [0.0, 3.0, 0.0, 3.0, 0.0, 3.0];
        let dist = DMatrix::from_fn(6, 6, |i, j| (pts[i] - pts[j]).abs());
        for n in 0..6 {
            let states = kl_segment_fixed(&dist, n).unwrap();
            assert_eq!(state_changes(&states).iter().filter(|&&f| f).count(), n);
        }
    }

    #[test]
    fn survival_scores_nest() {
        let pts: [f64; _] = [0.0, 0.2, 4.0, 4.1, 1.0, 1.1, 9.0];
        let dist = DMatrix::from_fn(7, 7, |i, j| (pts[i] - pts[j]).abs());
        let grid = kl_cost_grid(&dist, 32);
        let scores = kl_survival_scores(&dist, &grid);
        let cfg = KohlLemmConfig { cost_relative: false, ..Default::default() };
        let mut previous: Option<Vec<bool>> = None;
        for &c in &grid {
            let r = kl_detect_from_distances(&dist, &KohlLemmConfig { cost: c, ..cfg.clone() }, 1.0).unwrap();
            assert_eq!(r.scores, scores);
            if let Some(p) = &previous {
                assert!(r.boundaries.iter().zip(p).all(|(now, before)| !now || *before));
            }
            previous = Some(r.boundaries);
        }
    }
}
