//! ROC evaluation and the parameter-variation experiment harness.

pub mod experiment;
pub mod roc;

pub use experiment::{
    condition_series, cusum_roc, evaluate_condition, score_input, fit_realization_model, percentile, realization_dataset,
    run_detector, run_experiment, run_realization, summarize, Condition, ConditionOutcome, DetectorSpec,
    ExperimentCell, ExperimentPlan, ExperimentResult, FailedRealization, RealizationKey, Scheme,
};
pub use roc::{
    auc_numerator, confusion_at_boundaries, confusion_from_flags, roc_from_operating_points, roc_from_scores,
    Confusion, RocCurve,
};
