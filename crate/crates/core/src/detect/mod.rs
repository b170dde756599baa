//! Change-point detectors operating on epoch boundaries.

pub mod cusum;
pub mod kl;
pub mod linkage;
pub mod report;
pub mod slcd;

pub use cusum::{cusum_detect, cusum_run, window_log_ratio, CusumConfig, CusumRun, ThetaGrid};
pub use kl::{
    kl_distance_matrix, kl_segment, kl_segment_fixed, kl_sigma_rule, kohlmorgen_lemm_detect,
    kohlmorgen_lemm_distance, KlMode, KohlLemmConfig, SigmaRule,
};
pub use linkage::single_linkage_cluster;
pub use report::{ChangePointReport, DetectorKind};
pub use slcd::{slcd_detect, slcd_distance_matrix, SlcdConfig};
