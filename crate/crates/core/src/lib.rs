//! Feature extraction for change-point detection with Stationary Subspace
//! Analysis (SSA).
//!
//! The crate finds the most non-stationary linear subspace of a multivariate
//! time series, selects its dimension with a likelihood-ratio test, and feeds
//! the reduced signal to three change-point detectors. A synthetic benchmark
//! generator and an ROC/AUC harness are included for evaluation.

pub mod detect;
pub mod divergence;
pub mod epochs;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod order;
pub mod seeds;
pub mod series;
pub mod serde_mat;
pub mod ssa;
pub mod synth;
pub mod whitening;

pub use detect::{
    cusum_detect, kohlmorgen_lemm_detect, kohlmorgen_lemm_distance, slcd_detect, ChangePointReport, CusumConfig,
    DetectorKind, KohlLemmConfig, SlcdConfig,
};
pub use divergence::{kl_gauss, kl_gauss_symmetrized, kl_gauss_to_standard};
pub use epochs::{epoch_stats, make_epochs, transform_stats, EpochStats, Epoching};
pub use error::{Error, Result};
pub use eval::{run_experiment, roc_from_scores, ExperimentPlan, ExperimentResult, RocCurve};
pub use order::{select_order, OrderSelection};
pub use series::TimeSeries;
pub use ssa::{
    extract_sources, fit_n_projection, fit_s_projection, rotation_exp, ssa_gradient, ssa_objective,
    DemixingModel, Mode, ProjectionFit, RotationParam, Sources, SsaConfig,
};
pub use synth::{generate, SynthConfig, SynthDataset};
pub use whitening::{fit_whitening, WhiteningTransform};
