mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ssacpd::linalg::orthogonal_complement;
use ssacpd::ssa::{initial_rotations, Mode};
use ssacpd::synth::SynthConfig;
use ssacpd::{
    epoch_stats, fit_n_projection, fit_s_projection, generate, ssa_gradient, ssa_objective, DemixingModel,
    EpochStats, SsaConfig,
};

fn angle_to_axis(row: &DMatrix<f64>, axis: usize) -> f64 {
    let v = row.row(0);
    (v[axis].abs() / v.norm()).clamp(-1.0, 1.0).acos()
}

fn one_stationary_channel() -> EpochStats {
    let vars = [0.5, 1.5, 0.7, 1.3];
    let shifts = [0.4, -0.2, -0.4, 0.2];
    let means = shifts.iter().map(|&m| DVector::from_vec(vec![0.0, m])).collect();
    let covs = vars.iter().map(|&v| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, v])).collect();
    EpochStats::new(means, covs, vec![200; 4]).unwrap()
}

#[test]
fn stationary_channel_recovered_by_both_fits() {
    let stats = one_stationary_channel();
    let cfg = SsaConfig::default().with_d_s(1);
    let s = fit_s_projection(&stats, &cfg).unwrap();
    let n = fit_n_projection(&stats, &cfg).unwrap();
    assert!(angle_to_axis(&s.projection, 0) < 1e-3);
    assert!(angle_to_axis(&n.projection, 1) < 1e-3);
}

#[test]
fn subspace_recovered_on_generated_data() {
    let mut angles: Vec<f64> = (0..20)
        .map(|seed| {
            let cfg = SynthConfig { dim: 10, d_s: 8, d_n: 2, power: 3.0, seed, ..SynthConfig::default() };
            let data = generate(&cfg).unwrap();
            let raw = epoch_stats(&data.series, &data.epoching()).unwrap();
            let model = DemixingModel::fit(&raw, &SsaConfig::default().with_d_s(8).with_seed(seed)).unwrap();
            let unwhite = model.whitening.matrix.clone().try_inverse().unwrap();
            let truth = data.true_s_projection().unwrap() * unwhite;
            max_angle_deg(&model.b_s, &truth)
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    let median = 0.5 * (angles[9] + angles[10]);
    assert!(median < 5.0, "median principal angle {median} deg, all {angles:?}");
}

#[test]
fn n_fit_never_worse_than_complement_of_s_fit() {
    let mut r = rng(21);
    for k in 0..50 {
        let dim = r.random_range(3..7);
        let d_s = r.random_range(1..dim);
        let stats = white_stats(8, dim, &mut r);
        let cfg = SsaConfig::default().with_d_s(d_s).with_seed(k);
        let s = fit_s_projection(&stats, &cfg).unwrap();
        let n = fit_n_projection(&stats, &cfg).unwrap();
        let complement = ssa_objective(&stats, &orthogonal_complement(&s.projection)).unwrap();
        assert!(n.objective >= complement - 1e-12, "{} < {complement}", n.objective);
    }
}

fn loss_at(stats: &EpochStats, theta: f64) -> f64 {
    ssa_objective(stats, &DMatrix::from_row_slice(1, 2, &[theta.cos(), theta.sin()])).unwrap()
}

#[test]
fn changing_cross_covariance_moves_the_n_direction() {
    let rho = 0.4;
    let covs = vec![
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, -rho, -rho, 1.0]),
    ];
    let stats = EpochStats::new(vec![DVector::zeros(2); 2], covs, vec![500; 2]).unwrap();
    let fit = fit_n_projection(&stats, &SsaConfig::default().with_d_s(1)).unwrap();
    let complement = ssa_objective(&stats, &DMatrix::from_row_slice(1, 2, &[0.0, 1.0])).unwrap();
    assert!(fit.objective > complement);

    let sweep: Vec<(f64, f64)> = (0..360).map(|k| (k as f64, loss_at(&stats, (k as f64).to_radians()))).collect();
    let best = sweep.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let b = fit.projection.row(0);
    let fitted = b[1].atan2(b[0]).to_degrees().rem_euclid(360.0);
    let gap = sweep
        .iter()
        .filter(|p| p.1 >= best - 1e-12)
        .map(|p| {
            let d = (p.0 - fitted).rem_euclid(360.0);
            d.min(360.0 - d)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(gap <= 0.5, "fitted direction {fitted} deg is {gap} deg from the sweep maximum");
    assert!(fit.objective >= best - 1e-9);
}

#[test]
fn more_restarts_never_worse() {
    let mut r = rng(22);
    for seed in 0..10 {
        let stats = white_stats(10, 5, &mut r);
        assert_eq!(initial_rotations(5, 5, seed)[0], initial_rotations(5, 1, seed)[0]);
        let one = fit_s_projection(&stats, &SsaConfig::default().with_d_s(2).with_seed(seed).with_restarts(1)).unwrap();
        let five = fit_s_projection(&stats, &SsaConfig::default().with_d_s(2).with_seed(seed).with_restarts(5)).unwrap();
        assert!(five.objective <= one.objective + 1e-12);
    }
}

#[test]
fn gradient_vanishes_at_converged_optimum() {
    let mut r = rng(23);
    for seed in 0..10 {
        let stats = white_stats(10, 4, &mut r);
        let cfg = SsaConfig::default().with_d_s(2).with_seed(seed);
        let fit = fit_s_projection(&stats, &cfg).unwrap();
        if fit.converged() {
            let g = ssa_gradient(&stats, &fit.rotation, 2, Mode::Minimize).unwrap();
            assert!(g.max_abs() < cfg.grad_tol);
        }
    }
}

#[test]
fn restart_initializations_are_reproducible() {
    assert_eq!(initial_rotations(6, 4, 99), initial_rotations(6, 4, 99));
    assert_ne!(initial_rotations(6, 4, 99)[1], initial_rotations(6, 4, 100)[1]);
}
