//! Synthetic benchmark: linear mixtures of i.i.d. standard-normal stationary
//! sources and Markov-switching zero-mean Gaussian non-stationary sources.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::epochs::Epoching;
use crate::error::{Error, Result};
use crate::linalg::random_orthonormal_rows;
use crate::series::TimeSeries;

/// Mixing-matrix ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Mixing {
    RandomOrthogonal,
    /// `U diag(s) V^T` with singular values log-spaced in `[1/kappa, 1]`.
    RandomConditioned { kappa: f64 },
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub dim: usize,
    pub d_s: usize,
    pub d_n: usize,
    pub n_epochs: usize,
    pub epoch_len: usize,
    /// Power ratio `p > 1`; state variances lie on a log grid in `[1/p, p]`.
    pub power: f64,
    pub n_states: usize,
    pub p_stay: f64,
    pub seed: u64,
    pub mixing: Mixing,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 10,
            d_s: 5,
            d_n: 5,
            n_epochs: 30,
            epoch_len: 500,
            power: 3.0,
            n_states: 5,
            p_stay: 0.9,
            seed: 0,
            mixing: Mixing::RandomOrthogonal,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.d_s + self.d_n != self.dim {
            return Err(Error::Config(format!(
                "d_s + d_n must equal D: {} + {} != {}",
                self.d_s, self.d_n, self.dim
            )));
        }
        if self.n_epochs < 2 || self.epoch_len < 2 {
            return Err(Error::Config("need at least 2 epochs of at least 2 samples".into()));
        }
        if !(self.power >= 1.0) || !self.power.is_finite() {
            return Err(Error::Config(format!("power ratio must be >= 1, got {}", self.power)));
        }
        if self.n_states < 2 {
            return Err(Error::Config("need at least 2 Markov states".into()));
        }
        if !(0.0..=1.0).contains(&self.p_stay) {
            return Err(Error::Config(format!("p_stay must lie in [0, 1], got {}", self.p_stay)));
        }
        if let Mixing::RandomConditioned { kappa } = self.mixing {
            if !(kappa >= 1.0) {
                return Err(Error::Config(format!("condition number must be >= 1, got {kappa}")));
            }
        }
        Ok(())
    }

    /// Probability of moving to one specific other state.
    pub fn p_leave(&self) -> f64 {
        (1.0 - self.p_stay) / (self.n_states - 1) as f64
    }

    pub fn epoching(&self) -> Epoching {
        Epoching::fixed_length(self.n_epochs, self.epoch_len).expect("validated config")
    }
}

/// Five log-spaced variances from `1/p` to `p`, endpoints included.
pub fn variance_grid(power: f64) -> [f64; 5] {
    [-1.0, -0.5, 0.0, 0.5, 1.0].map(|e| power.powf(e))
}

/// One diagonal `d_n x d_n` covariance per state; entries drawn uniformly with
/// replacement from [`variance_grid`].
pub fn sample_state_covariances<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Vec<DMatrix<f64>> {
    let grid = variance_grid(config.power);
    (0..config.n_states)
        .map(|_| {
            let diag = DVector::from_fn(config.d_n, |_, _| grid[rng.random_range(0..grid.len())]);
            DMatrix::from_diagonal(&diag)
        })
        .collect()
}

/// Markov chain over states with uniform initial state.
pub fn sample_state_sequence<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Vec<usize> {
    let k = config.n_states;
    let mut seq = Vec::with_capacity(config.n_epochs);
    let mut state = rng.random_range(0..k);
    seq.push(state);
    for _ in 1..config.n_epochs {
        let u: f64 = rng.random();
        if u >= config.p_stay {
            // Uniform over the other k - 1 states.
            let j = rng.random_range(0..k - 1);
            state = if j >= state { j + 1 } else { j };
        }
        seq.push(state);
    }
    seq
}

/// `d x dim` matrix with orthonormal rows (QR of a Gaussian matrix).
pub fn random_projection<R: Rng + ?Sized>(dim: usize, d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d == 0 || d > dim {
        return Err(Error::Config(format!("projection dimension must lie in 1..={dim}, got {d}")));
    }
    Ok(random_orthonormal_rows(d, dim, rng))
}

fn sample_mixing<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> DMatrix<f64> {
    let dim = config.dim;
    match config.mixing {
        Mixing::Identity => DMatrix::identity(dim, dim),
        Mixing::RandomOrthogonal => random_orthonormal_rows(dim, dim, rng),
        Mixing::RandomConditioned { kappa } => {
            let u = random_orthonormal_rows(dim, dim, rng);
            let v = random_orthonormal_rows(dim, dim, rng);
            let s = DVector::from_fn(dim, |i, _| {
                let frac = if dim > 1 { i as f64 / (dim - 1) as f64 } else { 0.0 };
                kappa.powf(-frac)
            });
            u * DMatrix::from_diagonal(&s) * v.transpose()
        }
    }
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    s.max() / s.min()
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub series: TimeSeries,
    /// `x = A s` with sources ordered `[s_s; s_n]`.
    #[serde(with = "crate::serde_mat")]
    pub true_mixing: DMatrix<f64>,
    pub state_seq: Vec<usize>,
    /// Boundary indices `i` (between epochs `i` and `i + 1`) where the state changes.
    pub true_changepoints: Vec<usize>,
    #[serde(with = "crate::serde_mat::vec")]
    pub state_covs: Vec<DMatrix<f64>>,
}

impl SynthDataset {
    pub fn epoching(&self) -> Epoching {
        self.config.epoching()
    }

    /// One flag per epoch boundary.
    pub fn truth_flags(&self) -> Vec<bool> {
        change_flags(&self.state_seq)
    }

    /// True stationary projection in the original coordinates: rows span the
    /// orthogonal complement of the non-stationary mixing columns.
    pub fn true_s_projection(&self) -> Result<DMatrix<f64>> {
        let inv = self
            .true_mixing
            .clone()
            .try_inverse()
            .ok_or(Error::RankDeficient { min: 0.0, max: 0.0 })?;
        Ok(inv.rows(0, self.config.d_s).into_owned())
    }
}

/// JSON companion of a generated CSV: everything except the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSidecar {
    pub config: SynthConfig,
    pub n_samples: usize,
    pub state_seq: Vec<usize>,
    pub true_changepoints: Vec<usize>,
    #[serde(with = "crate::serde_mat")]
    pub mixing: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::vec")]
    pub state_covs: Vec<DMatrix<f64>>,
}

impl DatasetSidecar {
    pub fn epoching(&self) -> Epoching {
        self.config.epoching()
    }

    pub fn truth_flags(&self) -> Vec<bool> {
        change_flags(&self.state_seq)
    }
}

impl SynthDataset {
    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            config: self.config.clone(),
            n_samples: self.series.n_samples(),
            state_seq: self.state_seq.clone(),
            true_changepoints: self.true_changepoints.clone(),
            mixing: self.true_mixing.clone(),
            state_covs: self.state_covs.clone(),
        }
    }
}

pub fn change_flags(states: &[usize]) -> Vec<bool> {
    states.windows(2).map(|w| w[0] != w[1]).collect()
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let state_covs = sample_state_covariances(config, &mut rng);
    let state_seq = sample_state_sequence(config, &mut rng);
    let true_mixing = sample_mixing(config, &mut rng);
    if let Mixing::RandomConditioned { kappa } = config.mixing {
        let c = condition_number(&true_mixing);
        debug_assert!((1.0..=kappa * (1.0 + 1e-9)).contains(&c), "condition number {c} outside [1, {kappa}]");
    }

    let total = config.n_epochs * config.epoch_len;
    let mut sources = DMatrix::zeros(config.dim, total);
    for (e, &state) in state_seq.iter().enumerate() {
        let sd: Vec<f64> = state_covs[state].diagonal().iter().map(|v| v.sqrt()).collect();
        for t in e * config.epoch_len..(e + 1) * config.epoch_len {
            for i in 0..config.d_s {
                sources[(i, t)] = rng.sample(StandardNormal);
            }
            for (j, s) in sd.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                sources[(config.d_s + j, t)] = s * z;
            }
        }
    }
    let series = TimeSeries::new(&true_mixing * sources)?;
    let true_changepoints = change_flags(&state_seq)
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect();
    Ok(SynthDataset {
        config: config.clone(),
        series,
        true_mixing,
        state_seq,
        true_changepoints,
        state_covs,
    })
}
