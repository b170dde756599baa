//! Parameter-variation experiments comparing detector inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::roc::{confusion_from_flags, roc_from_operating_points, roc_from_scores, RocCurve};
use crate::detect::{
    cusum_detect, kohlmorgen_lemm_detect, slcd_detect, ChangePointReport, CusumConfig, KohlLemmConfig, SlcdConfig,
};
use crate::epochs::{epoch_stats, Epoching};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::series::TimeSeries;
use crate::ssa::{extract_sources, DemixingModel, Sources, SsaConfig};
use crate::synth::{generate, random_projection, SynthConfig, SynthDataset};

/// Largest tolerated fraction of failed realizations.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `D` fixed, grid over `d_n` with `d_s = D - d_n`.
    VaryDnFixedD,
    /// `d_n` fixed, grid over `d_s` with `D = d_s + d_n`.
    VaryDsFixedDn,
    /// Dimensions fixed, grid over the power ratio `p`.
    VaryPFixedDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    RandomProjection,
    Ssa,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Baseline, Condition::RandomProjection, Condition::Ssa];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::RandomProjection => "random_projection",
            Condition::Ssa => "ssa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    Slcd(SlcdConfig),
    Cusum(CusumConfig),
    KohlmorgenLemm(KohlLemmConfig),
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorSpec::Slcd(c) => c.validate(),
            DetectorSpec::Cusum(c) => c.validate(),
            DetectorSpec::KohlmorgenLemm(c) => c.validate(),
        }
    }

    pub fn is_univariate(&self) -> bool {
        matches!(self, DetectorSpec::Cusum(_))
    }
}

/// Runs `detector` over the given epoching. SLCD's `n_epochs` and the
/// Kohlmorgen/Lemm `separation` are ignored in favour of `epochs`.
pub fn run_detector(series: &TimeSeries, epochs: &Epoching, detector: &DetectorSpec) -> Result<ChangePointReport> {
    match detector {
        DetectorSpec::Slcd(c) => slcd_detect(series, epochs, c),
        DetectorSpec::Cusum(c) => cusum_detect(series, epochs, c),
        DetectorSpec::KohlmorgenLemm(c) => kohlmorgen_lemm_detect(series, epochs, c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scheme: Scheme,
    pub grid: Vec<f64>,
    /// Dataset settings not overridden by the grid.
    pub base: SynthConfig,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    pub detector: DetectorSpec,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ssa: SsaConfig,
    /// Points of the CUSUM threshold sweep.
    #[serde(default = "default_h_points")]
    pub h_points: usize,
}

fn default_realizations() -> usize {
    20
}

fn default_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

fn default_h_points() -> usize {
    32
}

/// One realization of one grid value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationKey {
    pub grid_index: usize,
    pub realization: usize,
}

impl ExperimentPlan {
    pub fn new(scheme: Scheme, grid: Vec<f64>, base: SynthConfig, detector: DetectorSpec) -> Self {
        ExperimentPlan {
            scheme,
            grid,
            base,
            n_realizations: default_realizations(),
            detector,
            conditions: default_conditions(),
            seed: 0,
            ssa: SsaConfig::default(),
            h_points: default_h_points(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("experiment grid is empty".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be positive".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("no conditions selected".into()));
        }
        if self.h_points < 2 {
            return Err(Error::Config("h_points must be at least 2".into()));
        }
        self.detector.validate()?;
        for gi in 0..self.grid.len() {
            self.dataset_config(RealizationKey { grid_index: gi, realization: 0 })?.validate()?;
        }
        Ok(())
    }

    pub fn keys(&self) -> Vec<RealizationKey> {
        (0..self.grid.len())
            .flat_map(|g| (0..self.n_realizations).map(move |r| RealizationKey { grid_index: g, realization: r }))
            .collect()
    }

    fn index(&self, key: RealizationKey) -> u64 {
        (key.grid_index * self.n_realizations + key.realization) as u64
    }

    pub fn seed_for(&self, stage: &str, key: RealizationKey) -> u64 {
        derive_seed(self.seed, stage, self.index(key))
    }

    pub fn dataset_config(&self, key: RealizationKey) -> Result<SynthConfig> {
        let v = *self
            .grid
            .get(key.grid_index)
            .ok_or_else(|| Error::Config(format!("grid index {} out of range", key.grid_index)))?;
        let as_dim = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("grid value {v} is not a dimension")))
            }
        };
        let mut c = self.base.clone();
        match self.scheme {
            Scheme::VaryDnFixedD => {
                c.d_n = as_dim(v)?;
                c.d_s = c.dim.checked_sub(c.d_n).ok_or_else(|| Error::Config(format!("d_n {v} exceeds D")))?;
            }
            Scheme::VaryDsFixedDn => {
                c.d_s = as_dim(v)?;
                c.dim = c.d_s + c.d_n;
            }
            Scheme::VaryPFixedDims => c.power = v,
        }
        c.seed = self.seed_for("synth", key);
        Ok(c)
    }

    /// Number of extracted dimensions fed to the detector.
    pub fn reduced_dim(&self, config: &SynthConfig) -> usize {
        if self.detector.is_univariate() {
            1
        } else {
            config.d_n
        }
    }

    pub fn ssa_config(&self, key: RealizationKey, config: &SynthConfig) -> SsaConfig {
        let d_s = config.dim - self.reduced_dim(config);
        self.ssa.clone().with_d_s(d_s).with_seed(self.seed_for("ssa", key))
    }
}

pub fn realization_dataset(plan: &ExperimentPlan, key: RealizationKey) -> Result<SynthDataset> {
    generate(&plan.dataset_config(key)?)
}

pub fn fit_realization_model(plan: &ExperimentPlan, key: RealizationKey, data: &SynthDataset) -> Result<DemixingModel> {
    let stats = epoch_stats(&data.series, &data.epoching())?;
    DemixingModel::fit(&stats, &plan.ssa_config(key, &data.config))
}

/// Detector input for one condition. `model` is required for [`Condition::Ssa`].
pub fn condition_series(
    plan: &ExperimentPlan,
    key: RealizationKey,
    data: &SynthDataset,
    condition: Condition,
    model: Option<&DemixingModel>,
) -> Result<TimeSeries> {
    match condition {
        Condition::Baseline => Ok(data.series.clone()),
        Condition::RandomProjection => {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed_for("random_projection", key));
            let b = random_projection(data.config.dim, plan.reduced_dim(&data.config), &mut rng)?;
            data.series.affine(&b, &nalgebra::DVector::zeros(data.config.dim))
        }
        Condition::Ssa => {
            let model = model.ok_or_else(|| Error::InvalidInput("ssa condition needs a fitted model".into()))?;
            extract_sources(&data.series, model, Sources::NonStationary)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub condition: Condition,
    pub auc: f64,
    pub roc: RocCurve,
    /// Report at the configured trade-off parameter.
    pub report: ChangePointReport,
    /// Channel used for univariate detectors on multichannel input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<usize>,
}

/// CUSUM ROC from an explicit sweep of `points` thresholds between the
/// smallest and largest window statistic of an alarm-free pass, log-spaced
/// in the offset above the smallest.
pub fn cusum_roc(
    series: &TimeSeries,
    epochs: &Epoching,
    truth: &[bool],
    config: &CusumConfig,
    points: usize,
) -> Result<RocCurve> {
    let free = cusum_detect(series, epochs, &config.with_threshold(f64::INFINITY))?;
    let seen: Vec<f64> = free.scores.iter().copied().filter(|&s| s != crate::detect::cusum::UNSCORED).collect();
    let lo = seen.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput("cusum produced no window statistics".into()));
    }
    let span = (hi - lo + 1.0).ln();
    let ops = (0..points)
        .into_par_iter()
        .map(|k| {
            let h = lo - 1.0 + (span * k as f64 / (points - 1) as f64).exp();
            let r = cusum_detect(series, epochs, &config.with_threshold(h))?;
            Ok((h, confusion_from_flags(&r.boundaries, truth, 0)?))
        })
        .collect::<Result<Vec<_>>>()?;
    roc_from_operating_points(&ops)
}

/// Detector report and ROC for one input. Univariate detectors on
/// multichannel input run per channel and keep the channel with the best AUC.
pub fn score_input(
    detector: &DetectorSpec,
    h_points: usize,
    series: &TimeSeries,
    epochs: &Epoching,
    truth: &[bool],
) -> Result<(RocCurve, ChangePointReport, Option<usize>)> {
    let single = |s: &TimeSeries| -> Result<(RocCurve, ChangePointReport)> {
        let report = run_detector(s, epochs, detector)?;
        let roc = match detector {
            DetectorSpec::Cusum(c) => cusum_roc(s, epochs, truth, c, h_points)?,
            _ => roc_from_scores(&report.scores, truth)?,
        };
        Ok((roc, report))
    };
    if detector.is_univariate() && series.n_channels() > 1 {
        let mut best: Option<(RocCurve, ChangePointReport, Option<usize>)> = None;
        for ch in 0..series.n_channels() {
            let (roc, report) = single(&series.channel(ch)?)?;
            if best.as_ref().map_or(true, |b| roc.auc > b.0.auc) {
                best = Some((roc, report, Some(ch)));
            }
        }
        return best.ok_or_else(|| Error::InvalidInput("series has no channels".into()));
    }
    let (roc, report) = single(series)?;
    Ok((roc, report, None))
}

/// Runs the detector on one condition's input and scores it against truth.
pub fn evaluate_condition(
    plan: &ExperimentPlan,
    data: &SynthDataset,
    condition: Condition,
    series: &TimeSeries,
) -> Result<ConditionOutcome> {
    let (roc, report, channel) =
        score_input(&plan.detector, plan.h_points, series, &data.epoching(), &data.truth_flags())?;
    Ok(ConditionOutcome { condition, auc: roc.auc, roc, report, channel })
}

/// All condition outcomes for one realization.
pub fn run_realization(plan: &ExperimentPlan, key: RealizationKey) -> Result<Vec<ConditionOutcome>> {
    let data = realization_dataset(plan, key)?;
    let model = if plan.conditions.contains(&Condition::Ssa) {
        Some(fit_realization_model(plan, key, &data)?)
    } else {
        None
    };
    plan.conditions
        .iter()
        .map(|&c| {
            let s = condition_series(plan, key, &data, c, model.as_ref())?;
            evaluate_condition(plan, &data, c, &s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub grid_value: f64,
    pub condition: Condition,
    pub aucs: Vec<f64>,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRealization {
    pub grid_value: f64,
    pub realization: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scheme: Scheme,
    pub n_realizations: usize,
    pub cells: Vec<ExperimentCell>,
    pub failures: Vec<FailedRealization>,
}

impl ExperimentResult {
    pub fn cell(&self, grid_value: f64, condition: Condition) -> Option<&ExperimentCell> {
        self.cells.iter().find(|c| c.grid_value == grid_value && c.condition == condition)
    }

    /// CSV with columns `grid_value,condition,q25,median,q75`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid_value,condition,q25,median,q75\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{},{}\n", c.grid_value, c.condition.name(), c.q25, c.median, c.q75));
        }
        out
    }
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Aggregates per-realization outcomes (in [`ExperimentPlan::keys`] order).
///
/// A realization with any failed condition is dropped from every condition.
pub fn summarize(plan: &ExperimentPlan, outcomes: &[(RealizationKey, Result<Vec<ConditionOutcome>>)]) -> Result<ExperimentResult> {
    let total = outcomes.len();
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for (gi, &value) in plan.grid.iter().enumerate() {
        let mut per: Vec<Vec<f64>> = vec![Vec::new(); plan.conditions.len()];
        for (key, res) in outcomes.iter().filter(|(k, _)| k.grid_index == gi) {
            match res {
                Ok(list) => {
                    for (slot, o) in per.iter_mut().zip(list) {
                        slot.push(o.auc);
                    }
                }
                Err(e) => failures.push(FailedRealization {
                    grid_value: value,
                    realization: key.realization,
                    message: e.to_string(),
                }),
            }
        }
        for (&condition, aucs) in plan.conditions.iter().zip(per) {
            if aucs.is_empty() {
                continue;
            }
            let mut sorted = aucs.clone();
            sorted.sort_by(f64::total_cmp);
            cells.push(ExperimentCell {
                grid_value: value,
                condition,
                q25: percentile(&sorted, 0.25),
                median: percentile(&sorted, 0.5),
                q75: percentile(&sorted, 0.75),
                aucs,
            });
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { failed: failures.len(), total });
    }
    Ok(ExperimentResult { scheme: plan.scheme, n_realizations: plan.n_realizations, cells, failures })
}

/// Generates, reduces, detects and scores every realization of the plan.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let outcomes: Vec<_> = plan.keys().into_par_iter().map(|k| (k, run_realization(plan, k))).collect();
    summarize(plan, &outcomes)
}
