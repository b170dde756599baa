#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ssacpd::{EpochStats, TimeSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian(d, d, rng);
    &g * g.transpose() / d as f64 + DMatrix::identity(d, d) * 0.3
}

pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    gaussian(d, d, rng).qr().q()
}

pub fn random_rows<R: Rng>(k: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    random_orthogonal(d, rng).rows(0, k).into_owned()
}

/// Random stats with equal counts, not whitened.
pub fn random_stats<R: Rng>(n: usize, d: usize, rng: &mut R) -> EpochStats {
    let means = (0..n).map(|_| DVector::from_fn(d, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal))).collect();
    let covs = (0..n).map(|_| random_spd(d, rng)).collect();
    EpochStats::new(means, covs, vec![100; n]).unwrap()
}

pub fn white_stats<R: Rng>(n: usize, d: usize, rng: &mut R) -> EpochStats {
    let raw = random_stats(n, d, rng);
    ssacpd::fit_whitening(&raw).unwrap().apply_stats(&raw).unwrap()
}

pub fn noise_series<R: Rng>(d: usize, t: usize, rng: &mut R) -> TimeSeries {
    TimeSeries::new(gaussian(d, t, rng)).unwrap()
}

/// Largest principal angle between row spaces, in degrees.
pub fn max_angle_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    ssacpd::linalg::principal_angles(a, b).into_iter().fold(0.0, f64::max).to_degrees()
}
