mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use ssacpd::detect::{kl_segment, single_linkage_cluster, slcd_distance_matrix, KohlLemmConfig, SigmaRule};
use ssacpd::epochs::Epoching;
use ssacpd::eval::percentile;
use ssacpd::order::{chi2_sf, likelihood_ratio_statistic, select_order};
use ssacpd::ssa::RotationParam;
use ssacpd::synth::SynthConfig;
use ssacpd::{
    cusum_detect, fit_whitening, generate, kl_gauss, kl_gauss_symmetrized, kohlmorgen_lemm_detect,
    kohlmorgen_lemm_distance, roc_from_scores, rotation_exp, slcd_detect, ssa_objective, transform_stats,
    CusumConfig, SlcdConfig, SsaConfig, TimeSeries,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn kl_is_nonnegative_and_symmetrized_is_symmetric(seed in any::<u64>(), d in 1usize..6) {
        let mut r = rng(seed);
        let (ca, cb) = (random_spd(d, &mut r), random_spd(d, &mut r));
        let ma = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
        let mb = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
        prop_assert!(kl_gauss(&ma, &ca, &mb, &cb).unwrap() >= 0.0);
        let ab = kl_gauss_symmetrized(&ma, &ca, &mb, &cb).unwrap();
        let ba = kl_gauss_symmetrized(&mb, &cb, &ma, &ca).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-15 * ab.max(1.0));
    }

    #[test]
    fn whitening_is_idempotent(seed in any::<u64>(), d in 1usize..7, n in 2usize..12) {
        let mut r = rng(seed);
        let white = white_stats(n, d, &mut r);
        let again = fit_whitening(&white).unwrap();
        prop_assert!((&again.matrix - DMatrix::identity(d, d)).amax() < 1e-6);
    }

    #[test]
    fn transforms_compose(seed in any::<u64>(), d in 2usize..6) {
        let mut r = rng(seed);
        let stats = random_stats(4, d, &mut r);
        let b1 = gaussian(d, d, &mut r);
        let b2 = gaussian(d - 1, d, &mut r);
        let a = transform_stats(&transform_stats(&stats, &b1).unwrap(), &b2).unwrap();
        let b = transform_stats(&stats, &(&b2 * &b1)).unwrap();
        for (x, y) in a.covariances.iter().zip(&b.covariances) {
            prop_assert!((x - y).amax() < 1e-12 * x.amax().max(1.0));
        }
    }

    #[test]
    fn rotation_exp_is_special_orthogonal(seed in any::<u64>(), dim in 2usize..9) {
        let mut r = rng(seed);
        let q = rotation_exp(&RotationParam::from_upper(&gaussian(dim, dim, &mut r)));
        prop_assert!((q.transpose() * &q - DMatrix::identity(dim, dim)).amax() < 1e-10);
        prop_assert!((q.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn objective_invariant_under_row_rotation(seed in any::<u64>(), dim in 2usize..7) {
        let mut r = rng(seed);
        let d = r.random_range(1..dim);
        let stats = white_stats(5, dim, &mut r);
        let b = random_rows(d, dim, &mut r);
        let q = random_orthogonal(d, &mut r);
        let (f0, f1) = (ssa_objective(&stats, &b).unwrap(), ssa_objective(&stats, &(q * &b)).unwrap());
        prop_assert!((f0 - f1).abs() < 1e-10 * f0.abs().max(1.0));
    }

    #[test]
    fn likelihood_ratio_invariant_under_row_rotation(seed in any::<u64>(), dim in 2usize..6) {
        let mut r = rng(seed);
        let d = r.random_range(1..=dim);
        let stats = white_stats(6, dim, &mut r);
        let b = random_rows(d, dim, &mut r);
        let q = random_orthogonal(d, &mut r);
        let a = likelihood_ratio_statistic(&transform_stats(&stats, &b).unwrap()).unwrap();
        let c = likelihood_ratio_statistic(&transform_stats(&stats, &(q * &b)).unwrap()).unwrap();
        prop_assert!((a.lambda - c.lambda).abs() < 1e-8 * a.lambda.max(1.0));
    }

    #[test]
    fn p_value_strictly_decreasing_in_statistic(x in 0.0f64..200.0, dx in 1e-3f64..50.0, dof in 1.0f64..300.0) {
        let (a, b) = (chi2_sf(x, dof), chi2_sf(x + dx, dof));
        prop_assert!(b <= a);
        // Strict wherever the p-value is not saturated at 0 or 1 in f64.
        if a < 1.0 && b > 0.0 {
            prop_assert!(b < a);
        }
    }

    #[test]
    fn kernel_distance_symmetric_and_nonnegative(seed in any::<u64>(), d in 1usize..4, w in 1usize..15) {
        let mut r = rng(seed);
        let a = gaussian(d, w, &mut r);
        let b = gaussian(d, w, &mut r) * 2.0;
        let sigma = r.random_range(0.1..2.0);
        let ab = kohlmorgen_lemm_distance(&a, &b, sigma).unwrap();
        let ba = kohlmorgen_lemm_distance(&b, &a, sigma).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1e-12));
        prop_assert_eq!(kohlmorgen_lemm_distance(&a, &a, sigma).unwrap(), 0.0);
    }

    #[test]
    fn roc_matches_threshold_enumeration(seed in any::<u64>(), n in 2usize..=12) {
        let mut r = rng(seed);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..5) as f64 * 0.5).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        truth[0] = true;
        truth[n - 1] = false;
        let roc = roc_from_scores(&scores, &truth).unwrap();
        let (p, neg) = (truth.iter().filter(|&&t| t).count() as f64, truth.iter().filter(|&&t| !t).count() as f64);
        let mut taus: Vec<f64> = scores.clone();
        taus.sort_by(|a, b| b.total_cmp(a));
        taus.dedup();
        let mut pts = vec![(0.0, 0.0)];
        for tau in taus {
            let tp = (0..n).filter(|&i| truth[i] && scores[i] >= tau).count() as f64;
            let fp = (0..n).filter(|&i| !truth[i] && scores[i] >= tau).count() as f64;
            pts.push((fp / neg, tp / p));
        }
        prop_assert_eq!(&roc.points, &pts);
        let trap: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        prop_assert!((roc.auc - trap).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        truth[0] = true;
        truth[1] = false;
        let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
        prop_assert_eq!(roc_from_scores(&scores, &truth).unwrap().auc, roc_from_scores(&mapped, &truth).unwrap().auc);
    }

    #[test]
    fn percentiles_are_ordered(values in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let mut v = values;
        v.sort_by(f64::total_cmp);
        let (a, b, c) = (percentile(&v, 0.25), percentile(&v, 0.5), percentile(&v, 0.75));
        prop_assert!(a <= b && b <= c);
    }
}

proptest! {
    #![proptest_config(cases(40))]

    #[test]
    fn linkage_labels_respect_cluster_count(seed in any::<u64>(), n in 1usize..15) {
        let mut r = rng(seed);
        let k = r.random_range(1..=n);
        let pts = gaussian(2, n, &mut r);
        let dist = DMatrix::from_fn(n, n, |i, j| (pts.column(i) - pts.column(j)).norm());
        let labels = single_linkage_cluster(&dist, k).unwrap();
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        prop_assert_eq!(distinct.len(), k);
    }

    #[test]
    fn generator_is_deterministic_and_aligned(seed in any::<u64>()) {
        let cfg = SynthConfig { dim: 3, d_s: 1, d_n: 2, n_epochs: 12, epoch_len: 20, seed, ..SynthConfig::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        prop_assert_eq!(a.series.data(), b.series.data());
        prop_assert_eq!(&a.state_seq, &b.state_seq);
        let flags = a.truth_flags();
        prop_assert_eq!(flags.len(), cfg.n_epochs - 1);
        for (i, f) in flags.iter().enumerate() {
            prop_assert_eq!(*f, a.state_seq[i] != a.state_seq[i + 1]);
        }
        let edges = a.epoching();
        for &c in &a.true_changepoints {
            prop_assert!(c < edges.n_boundaries());
        }
    }

    #[test]
    fn slcd_and_kl_invariant_under_channel_permutation(seed in any::<u64>()) {
        let cfg = SynthConfig { dim: 3, d_s: 1, d_n: 2, n_epochs: 12, epoch_len: 40, seed, ..SynthConfig::default() };
        let data = generate(&cfg).unwrap();
        let perm = [2usize, 0, 1];
        let permuted = TimeSeries::new(DMatrix::from_fn(3, data.series.n_samples(), |i, t| {
            data.series.data()[(perm[i], t)]
        }))
        .unwrap();
        let epochs = data.epoching();
        let slcd = SlcdConfig { n_epochs: 12, k_clusters: 3 };
        let a = slcd_detect(&data.series, &epochs, &slcd).unwrap();
        let b = slcd_detect(&permuted, &epochs, &slcd).unwrap();
        prop_assert_eq!(&a.boundaries, &b.boundaries);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
        let kl = KohlLemmConfig { window: 20, ..KohlLemmConfig::default() };
        let a = kohlmorgen_lemm_detect(&data.series, &epochs, &kl).unwrap();
        let b = kohlmorgen_lemm_detect(&permuted, &epochs, &kl).unwrap();
        prop_assert_eq!(&a.boundaries, &b.boundaries);
        let (sa, sb) = (a.sigma.unwrap(), b.sigma.unwrap());
        prop_assert!((sa - sb).abs() <= 1e-12 * sa);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn slcd_threshold_sets_nest(seed in any::<u64>()) {
        let mut r = rng(seed);
        let stats = random_stats(10, 2, &mut r);
        let m = slcd_distance_matrix(&stats).unwrap();
        let scores: Vec<f64> = (0..9).map(|i| m[(i, i + 1)]).collect();
        let (lo, hi) = (r.random_range(0.0..2.0), r.random_range(2.0..4.0));
        for (i, s) in scores.iter().enumerate() {
            if *s >= hi {
                prop_assert!(scores[i] >= lo);
            }
        }
    }

    #[test]
    fn kl_boundaries_nest_in_cost(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 12;
        let pts: Vec<f64> = (0..n).map(|i| if (i / 4) % 2 == 0 { 0.0 } else { 3.0 } + r.random_range(-0.5..0.5)).collect();
        let dist = DMatrix::from_fn(n, n, |i, j| (pts[i] - pts[j]).powi(2));
        let report = ssacpd::detect::kl::kl_detect_from_distances(&dist, &KohlLemmConfig::default(), 1.0).unwrap();
        let c1 = r.random_range(0.01..5.0);
        let c2 = c1 * r.random_range(1.0..10.0);
        let flags = |c: f64| -> Vec<bool> { report.scores.iter().map(|&s| s > 0.0 && s >= c).collect() };
        let (f1, f2) = (flags(c1), flags(c2));
        for i in 0..f1.len() {
            prop_assert!(!f2[i] || f1[i]);
        }
        let states = kl_segment(&dist, f64::INFINITY);
        prop_assert!(states.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn cusum_first_alarm_is_monotone_in_threshold(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut x = gaussian(1, 3000, &mut r);
        for t in 1500..3000 {
            x[(0, t)] *= 3.0;
        }
        let series = TimeSeries::new(x).unwrap();
        let epochs = Epoching::fixed_length(30, 100).unwrap();
        let (h1, h2) = (r.random_range(1.0..10.0), r.random_range(10.0..30.0));
        let first = |h: f64| {
            ssacpd::detect::cusum_run(&series, &epochs, &CusumConfig { window: 100, threshold: h, ..CusumConfig::default() })
                .unwrap()
                .alarms
                .first()
                .copied()
                .unwrap_or(usize::MAX)
        };
        prop_assert!(first(h2) >= first(h1));
        let report = cusum_detect(&series, &epochs, &CusumConfig { window: 100, threshold: h1, ..CusumConfig::default() }).unwrap();
        for (f, s) in report.boundaries.iter().zip(&report.scores) {
            prop_assert_eq!(*f, *s >= h1);
        }
    }
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn fitted_projections_are_orthonormal(seed in any::<u64>()) {
        let cfg = SynthConfig { dim: 5, d_s: 3, d_n: 2, n_epochs: 12, epoch_len: 100, seed, ..SynthConfig::default() };
        let data = generate(&cfg).unwrap();
        let stats = ssacpd::epoch_stats(&data.series, &data.epoching()).unwrap();
        let model = ssacpd::DemixingModel::fit(&stats, &SsaConfig::default().with_d_s(3).with_seed(seed)).unwrap();
        prop_assert!((&model.b_s * model.b_s.transpose() - DMatrix::identity(3, 3)).amax() < 1e-8);
        prop_assert!((&model.b_n * model.b_n.transpose() - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn fit_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let stats = white_stats(8, 4, &mut r);
        let cfg = SsaConfig::default().with_d_s(2).with_seed(seed);
        let a = ssacpd::fit_s_projection(&stats, &cfg).unwrap();
        let b = ssacpd::fit_s_projection(&stats, &cfg).unwrap();
        prop_assert_eq!(a.objective, b.objective);
        prop_assert_eq!(a.projection, b.projection);
    }

    #[test]
    fn chosen_order_is_largest_accepted(seed in any::<u64>()) {
        let cfg = SynthConfig { dim: 4, d_s: 2, d_n: 2, n_epochs: 10, epoch_len: 150, seed, ..SynthConfig::default() };
        let data = generate(&cfg).unwrap();
        let raw = ssacpd::epoch_stats(&data.series, &data.epoching()).unwrap();
        let white = fit_whitening(&raw).unwrap().apply_stats(&raw).unwrap();
        let sel = select_order(&white, &SsaConfig::default().with_restarts(2), 0.01).unwrap();
        let rescan = sel.per_d.iter().filter(|c| !c.rejected).map(|c| c.d_s).max().unwrap_or(0);
        prop_assert_eq!(sel.chosen_d_s, rescan);
        for c in &sel.per_d {
            if let Some(t) = c.test {
                prop_assert_eq!(c.rejected, t.rejects(0.01));
                prop_assert!((0.0..=1.0).contains(&t.p_value));
            }
        }
    }
}

#[test]
fn sigma_rule_variants_agree() {
    let mut r = rng(77);
    let series = noise_series(2, 400, &mut r);
    let auto = ssacpd::detect::kl::resolve_sigma(&series, &SigmaRule::Auto { scale: 2.0 }, 50).unwrap();
    let base = ssacpd::detect::kl_sigma_rule(&series, 50).unwrap();
    assert_eq!(auto, 2.0 * base);
    let fixed = ssacpd::detect::kl::resolve_sigma(&series, &SigmaRule::Fixed { value: 0.3 }, 50).unwrap();
    assert_eq!(fixed, 0.3);
}
