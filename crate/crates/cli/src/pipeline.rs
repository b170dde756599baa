//! Cached multi-stage pipeline driven by one JSON configuration.
//!
//! Intermediates live under `<out>/cache/<section>/`. A section's cache is
//! keyed by a hash of its resolved configuration and is wiped when that
//! changes. Final tables are always rebuilt from the cached intermediates.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssacpd::eval::{
    condition_series, evaluate_condition, fit_realization_model, realization_dataset, score_input, summarize,
    Condition, ConditionOutcome, DetectorSpec, ExperimentPlan, RealizationKey,
};
use ssacpd::order::{bnise, BniseReport, HoldoutConfig};
use ssacpd::seeds::derive_seed;
use ssacpd::{
    epoch_stats, extract_sources, fit_whitening, generate, make_epochs, select_order, DemixingModel, OrderSelection,
    Sources, SsaConfig, SynthConfig,
};

use crate::error::{CliError, CliResult};
use crate::io::{write_atomic, write_json};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub format_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiment: Option<ExperimentPlan>,
    #[serde(default)]
    pub order_selection: Option<OrderStudy>,
    #[serde(default)]
    pub parameter_scan: Option<ParameterScan>,
}

/// Repeated order selection on generated data for a range of true `d_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderStudy {
    /// `d_s` and `d_n` are overridden per entry of `true_d_s`.
    pub dataset: SynthConfig,
    pub true_d_s: Vec<usize>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub ssa: SsaConfig,
}

/// Detection quality and hold-out scores per candidate `d_s` on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterScan {
    pub dataset: SynthConfig,
    /// Epochs used to fit SSA.
    #[serde(default = "default_ssa_epochs")]
    pub ssa_epochs: usize,
    pub candidates: Vec<usize>,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub holdout: HoldoutConfig,
    #[serde(default)]
    pub ssa: SsaConfig,
    #[serde(default = "default_h_points")]
    pub h_points: usize,
}

fn default_realizations() -> usize {
    20
}

fn default_alpha() -> f64 {
    0.01
}

fn default_ssa_epochs() -> usize {
    30
}

fn default_h_points() -> usize {
    32
}

impl PipelineConfig {
    /// Applies the master seed to every section.
    pub fn resolved(mut self, seed_override: Option<u64>) -> Self {
        if let Some(s) = seed_override {
            self.seed = s;
        }
        let master = self.seed;
        if let Some(plan) = &mut self.experiment {
            plan.seed = derive_seed(master, "experiment", 0);
        }
        if let Some(study) = &mut self.order_selection {
            study.dataset.seed = derive_seed(master, "order_selection", 0);
            study.ssa.seed = derive_seed(master, "order_selection_ssa", 0);
        }
        if let Some(scan) = &mut self.parameter_scan {
            scan.dataset.seed = derive_seed(master, "parameter_scan", 0);
            scan.ssa.seed = derive_seed(master, "parameter_scan_ssa", 0);
            scan.holdout.seed = derive_seed(master, "parameter_scan_holdout", 0);
        }
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.experiment.is_none() && self.order_selection.is_none() && self.parameter_scan.is_none() {
            return Err(CliError::Validation("pipeline configuration has no sections".into()));
        }
        if let Some(plan) = &self.experiment {
            plan.validate().map_err(|e| CliError::from(e).in_stage("experiment"))?;
        }
        if let Some(study) = &self.order_selection {
            let fail = |m: String| Err(CliError::Validation(format!("stage order_selection: {m}")));
            if study.true_d_s.is_empty() || study.n_realizations == 0 {
                return fail("needs at least one true d_s and one realization".into());
            }
            if !(study.alpha > 0.0 && study.alpha < 1.0) {
                return fail(format!("alpha must lie in (0, 1), got {}", study.alpha));
            }
            for &d in &study.true_d_s {
                study_config(study, d, 0).validate().map_err(|e| CliError::from(e).in_stage("order_selection"))?;
            }
        }
        if let Some(scan) = &self.parameter_scan {
            let stage = |e: ssacpd::Error| CliError::from(e).in_stage("parameter_scan");
            scan.dataset.validate().map_err(stage)?;
            scan.detector.validate().map_err(stage)?;
            let dim = scan.dataset.dim;
            if scan.candidates.is_empty() || scan.candidates.iter().any(|&d| d == 0 || d >= dim) {
                return Err(CliError::Validation(format!(
                    "stage parameter_scan: candidates must be non-empty and lie in 1..{dim}"
                )));
            }
        }
        Ok(())
    }
}

fn study_config(study: &OrderStudy, d_s: usize, index: u64) -> SynthConfig {
    let mut c = study.dataset.clone();
    c.d_s = d_s;
    c.d_n = c.dim.saturating_sub(d_s);
    c.seed = derive_seed(study.dataset.seed, "dataset", index);
    c
}

/// Per-stage counts of computed and reused intermediates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub computed: usize,
    pub reused: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub stages: BTreeMap<String, StageCounts>,
    pub outputs: Vec<PathBuf>,
}

impl PipelineSummary {
    fn count(&mut self, stage: &str, reused: bool) {
        let e = self.stages.entry(stage.to_string()).or_default();
        if reused {
            e.reused += 1;
        } else {
            e.computed += 1;
        }
    }
}

struct Cache {
    dir: PathBuf,
}

impl Cache {
    fn open<T: Serialize>(dir: PathBuf, key: &T) -> CliResult<Cache> {
        let json = serde_json::to_vec(key).map_err(|e| CliError::Runtime(e.to_string()))?;
        let digest: String = Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect();
        let stamp = dir.join("fingerprint");
        let current = fs::read_to_string(&stamp).ok();
        if current.as_deref() != Some(digest.as_str()) && dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        write_atomic(&stamp, digest.as_bytes())?;
        Ok(Cache { dir })
    }

    fn load<T: DeserializeOwned>(&self, name: &str) -> Option<T> {
        let text = fs::read_to_string(self.dir.join(name)).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn store<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        write_json(&self.dir.join(name), value)
    }

    /// Loads `name` if present, otherwise computes and stores it.
    fn get_or<T, E, F>(&self, name: &str, compute: F) -> Result<(T, bool), E>
    where
        T: Serialize + DeserializeOwned,
        E: From<CliError>,
        F: FnOnce() -> Result<T, E>,
    {
        if let Some(v) = self.load(name) {
            return Ok((v, true));
        }
        let v = compute()?;
        self.store(name, &v)?;
        Ok((v, false))
    }
}

fn write_text(out: &Path, name: &str, text: &str, summary: &mut PipelineSummary) -> CliResult<()> {
    let path = out.join(name);
    write_atomic(&path, text.as_bytes())?;
    summary.outputs.push(path);
    Ok(())
}

/// Runs every configured section and writes its tables into `out`.
pub fn run_pipeline(config: &PipelineConfig, out: &Path) -> CliResult<PipelineSummary> {
    config.validate()?;
    let mut summary = PipelineSummary::default();
    if let Some(plan) = &config.experiment {
        run_experiment_section(plan, out, &mut summary)?;
    }
    if let Some(study) = &config.order_selection {
        run_order_section(study, out, &mut summary)?;
    }
    if let Some(scan) = &config.parameter_scan {
        run_scan_section(scan, out, &mut summary)?;
    }
    Ok(summary)
}

type Outcomes = Result<Vec<ConditionOutcome>, ssacpd::Error>;

/// A realization failure (recorded and dropped) or a cache IO failure (fatal).
enum Failure {
    Core(ssacpd::Error),
    Cli(CliError),
}

impl From<ssacpd::Error> for Failure {
    fn from(e: ssacpd::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Cli(e)
    }
}

fn run_experiment_section(plan: &ExperimentPlan, out: &Path, summary: &mut PipelineSummary) -> CliResult<()> {
    let cache = Cache::open(out.join("cache").join("experiment"), plan)?;
    let needs_model = plan.conditions.contains(&Condition::Ssa);
    let keys = plan.keys();
    let results: Vec<(RealizationKey, Outcomes, Option<bool>, bool)> = keys
        .par_iter()
        .map(|&key| -> CliResult<_> {
            let tag = format!("g{}_r{}", key.grid_index, key.realization);
            let outcome_file = format!("outcomes/{tag}.json");
            if let Some(v) = cache.load::<Vec<ConditionOutcome>>(&outcome_file) {
                return Ok((key, Ok(v), needs_model.then_some(true), true));
            }
            let mut model_reused = None;
            let outcomes = (|| -> Result<Vec<ConditionOutcome>, Failure> {
                let data = realization_dataset(plan, key)?;
                let model = if needs_model {
                    let (m, reused) = cache.get_or(&format!("models/{tag}.json"), || {
                        Ok::<_, Failure>(fit_realization_model(plan, key, &data)?)
                    })?;
                    model_reused = Some(reused);
                    Some(m)
                } else {
                    None
                };
                let mut list = Vec::with_capacity(plan.conditions.len());
                for &c in &plan.conditions {
                    let s = condition_series(plan, key, &data, c, model.as_ref())?;
                    list.push(evaluate_condition(plan, &data, c, &s)?);
                }
                Ok(list)
            })();
            let outcomes = match outcomes {
                Ok(list) => {
                    cache.store(&outcome_file, &list).map_err(|e| e.in_stage("detect"))?;
                    Ok(list)
                }
                Err(Failure::Core(e)) => Err(e),
                Err(Failure::Cli(e)) => return Err(e.in_stage("detect")),
            };
            Ok((key, outcomes, model_reused, false))
        })
        .collect::<CliResult<_>>()?;

    let mut outcomes = Vec::with_capacity(results.len());
    for (key, res, model_reused, reused) in results {
        if let Some(m) = model_reused {
            summary.count("fit", m);
        }
        summary.count("detect", reused);
        outcomes.push((key, res));
    }
    let result = summarize(plan, &outcomes).map_err(|e| CliError::from(e).in_stage("evaluate"))?;
    summary.count("evaluate", false);
    write_text(out, "experiment.csv", &result.to_csv(), summary)?;
    let json = out.join("experiment.json");
    write_json(&json, &result)?;
    summary.outputs.push(json);
    Ok(())
}

fn run_order_section(study: &OrderStudy, out: &Path, summary: &mut PipelineSummary) -> CliResult<()> {
    let cache = Cache::open(out.join("cache").join("order_selection"), study)?;
    let keys: Vec<(usize, usize)> =
        study.true_d_s.iter().flat_map(|&d| (0..study.n_realizations).map(move |r| (d, r))).collect();
    let results: Vec<(usize, OrderSelection, bool)> = keys
        .par_iter()
        .enumerate()
        .map(|(idx, &(d_s, r))| {
            let sel = cache.get_or(&format!("selections/d{d_s}_r{r}.json"), || {
                let cfg = study_config(study, d_s, idx as u64);
                let data = generate(&cfg)?;
                let raw = epoch_stats(&data.series, &data.epoching())?;
                let white = fit_whitening(&raw)?.apply_stats(&raw)?;
                let ssa = study.ssa.clone().with_seed(derive_seed(study.ssa.seed, "candidate", idx as u64));
                Ok::<_, CliError>(select_order(&white, &ssa, study.alpha)?)
            });
            sel.map(|(s, reused)| (d_s, s, reused)).map_err(|e| e.in_stage("select_order"))
        })
        .collect::<CliResult<_>>()?;

    let dim = study.dataset.dim;
    let mut table = String::from("true_d_s,candidate_d_s,mean_p_value,rejection_rate\n");
    let mut choices = String::from("true_d_s,realization,chosen_d_s\n");
    let mut modes = String::from("true_d_s,modal_chosen_d_s,hits\n");
    for &d_s in &study.true_d_s {
        let sels: Vec<&OrderSelection> = results.iter().filter(|r| r.0 == d_s).map(|r| &r.1).collect();
        for cand in 1..dim {
            let tests: Vec<_> = sels.iter().filter_map(|s| s.per_d.iter().find(|c| c.d_s == cand)).collect();
            let ps: Vec<f64> = tests.iter().filter_map(|c| c.test.map(|t| t.p_value)).collect();
            let mean = if ps.is_empty() { f64::NAN } else { ps.iter().sum::<f64>() / ps.len() as f64 };
            let rate = tests.iter().filter(|c| c.rejected).count() as f64 / tests.len().max(1) as f64;
            table.push_str(&format!("{d_s},{cand},{mean},{rate}\n"));
        }
        let mut counts = vec![0usize; dim];
        for (r, s) in sels.iter().enumerate() {
            choices.push_str(&format!("{d_s},{r},{}\n", s.chosen_d_s));
            counts[s.chosen_d_s.min(dim - 1)] += 1;
        }
        let modal = modal_choice(&counts);
        modes.push_str(&format!("{d_s},{modal},{}\n", counts[d_s.min(dim - 1)]));
    }
    for (_, _, reused) in &results {
        summary.count("select_order", *reused);
    }
    write_text(out, "order_selection.csv", &table, summary)?;
    write_text(out, "order_choices.csv", &choices, summary)?;
    write_text(out, "order_modes.csv", &modes, summary)
}

/// Most frequent value; ties go to the smallest.
pub fn modal_choice(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScanEntry {
    d_s: Option<usize>,
    auc: f64,
    channel: Option<usize>,
}

fn run_scan_section(scan: &ParameterScan, out: &Path, summary: &mut PipelineSummary) -> CliResult<()> {
    let cache = Cache::open(out.join("cache").join("parameter_scan"), scan)?;
    let data = generate(&scan.dataset).map_err(|e| CliError::from(e).in_stage("generate"))?;
    let epochs = data.epoching();
    let truth = data.truth_flags();
    let score = |series: &ssacpd::TimeSeries, d_s: Option<usize>| -> CliResult<ScanEntry> {
        let (roc, _, channel) = score_input(&scan.detector, scan.h_points, series, &epochs, &truth)?;
        Ok(ScanEntry { d_s, auc: roc.auc, channel })
    };

    let (baseline, reused) = cache.get_or("baseline.json", || score(&data.series, None)).map_err(|e| e.in_stage("detect"))?;
    summary.count("detect", reused);

    let ssa_epochs = make_epochs(&data.series, scan.ssa_epochs).map_err(|e| CliError::from(e).in_stage("fit"))?;
    let stats = epoch_stats(&data.series, &ssa_epochs)?;
    let entries: Vec<(ScanEntry, bool, bool)> = scan
        .candidates
        .par_iter()
        .map(|&d_s| {
            let (model, model_reused) = cache
                .get_or(&format!("models/d{d_s}.json"), || {
                    let cfg = scan.ssa.clone().with_d_s(d_s).with_seed(derive_seed(scan.ssa.seed, "candidate", d_s as u64));
                    Ok::<_, CliError>(DemixingModel::fit(&stats, &cfg)?)
                })
                .map_err(|e| e.in_stage("fit"))?;
            let (entry, reused) = cache
                .get_or(&format!("scores/d{d_s}.json"), || {
                    let reduced = extract_sources(&data.series, &model, Sources::NonStationary)?;
                    score(&reduced, Some(d_s))
                })
                .map_err(|e| e.in_stage("detect"))?;
            Ok((entry, model_reused, reused))
        })
        .collect::<CliResult<_>>()?;

    let (report, reused): (BniseReport, bool) = cache
        .get_or("bnise.json", || Ok::<_, CliError>(bnise(&data.series, scan.dataset.dim, &scan.holdout)?))
        .map_err(|e| e.in_stage("bnise"))?;
    summary.count("bnise", reused);

    let mut table = String::from("input,d_s,auc\n");
    table.push_str(&format!("baseline,,{}\n", baseline.auc));
    for (e, model_reused, reused) in &entries {
        summary.count("fit", *model_reused);
        summary.count("detect", *reused);
        table.push_str(&format!("ssa,{},{}\n", e.d_s.unwrap_or(0), e.auc));
    }
    summary.count("evaluate", false);
    write_text(out, "scan_auc.csv", &table, summary)?;
    write_text(out, "bnise.csv", &report.to_csv(), summary)
}
