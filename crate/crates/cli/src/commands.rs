use std::path::{Path, PathBuf};

use serde::Serialize;
use ssacpd::detect::{CusumConfig, KlMode, KohlLemmConfig, SigmaRule, SlcdConfig};
use ssacpd::eval::{confusion_at_boundaries, Confusion};
use ssacpd::order::{bnise, HoldoutConfig};
use ssacpd::synth::DatasetSidecar;
use ssacpd::{
    cusum_detect, epoch_stats, extract_sources, fit_whitening, generate, kohlmorgen_lemm_detect, make_epochs,
    roc_from_scores, select_order, slcd_detect, ChangePointReport, DemixingModel, RocCurve, Sources, SsaConfig,
    SynthConfig,
};

use crate::args::{
    BniseArgs, DetectArgs, DetectorName, EvaluateArgs, FitSsaArgs, GenerateArgs, PlotArgs, SelectOrderArgs,
};
use crate::error::{CliError, CliResult};
use crate::io::{read_json, read_series, write_atomic, write_json, write_series};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineSummary};
use crate::plot::{chart_from_csv, render_svg};

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

impl Context {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn config_or_default<T: serde::de::DeserializeOwned + Default>(&self) -> CliResult<T> {
        match &self.config {
            Some(p) => read_json(p),
            None => Ok(T::default()),
        }
    }
}

pub fn cmd_generate(ctx: &Context, args: &GenerateArgs) -> CliResult<Vec<PathBuf>> {
    let mut cfg: SynthConfig = ctx.config_or_default()?;
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    set!(dim, d_s, d_n, n_epochs, epoch_len, power, n_states, p_stay);
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let data = generate(&cfg)?;
    let csv = ctx.path(&format!("{}.csv", args.name));
    let json = ctx.path(&format!("{}.json", args.name));
    write_series(&csv, &data.series)?;
    write_json(&json, &data.sidecar())?;
    Ok(vec![csv, json])
}

fn ssa_config(ctx: &Context, d_s: Option<usize>, restarts: Option<usize>) -> CliResult<SsaConfig> {
    let mut cfg: SsaConfig = ctx.config_or_default()?;
    if let Some(d) = d_s {
        cfg.d_s = d;
    }
    if let Some(r) = restarts {
        cfg.n_restarts = r;
    }
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn cmd_fit_ssa(ctx: &Context, args: &FitSsaArgs) -> CliResult<Vec<PathBuf>> {
    let cfg = ssa_config(ctx, args.d_s, args.restarts)?;
    let series = read_series(&args.data)?;
    cfg.validate(series.n_channels())?;
    let stats = epoch_stats(&series, &make_epochs(&series, args.epochs)?)?;
    let model = DemixingModel::fit(&stats, &cfg)?;
    let path = ctx.path("model.json");
    write_json(&path, &model)?;
    let mut written = vec![path];
    if args.extract {
        for (which, name) in [(Sources::Stationary, "sources_s.csv"), (Sources::NonStationary, "sources_n.csv")] {
            let p = ctx.path(name);
            write_series(&p, &extract_sources(&series, &model, which)?)?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn cmd_select_order(ctx: &Context, args: &SelectOrderArgs) -> CliResult<Vec<PathBuf>> {
    let cfg = ssa_config(ctx, None, args.restarts)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Validation(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let series = read_series(&args.data)?;
    let raw = epoch_stats(&series, &make_epochs(&series, args.epochs)?)?;
    let white = fit_whitening(&raw)?.apply_stats(&raw)?;
    let selection = select_order(&white, &cfg, args.alpha)?;
    let csv = ctx.path("order.csv");
    let json = ctx.path("order.json");
    write_atomic(&csv, selection.to_csv().as_bytes())?;
    write_json(&json, &selection)?;
    Ok(vec![csv, json])
}

pub fn cmd_bnise(ctx: &Context, args: &BniseArgs) -> CliResult<Vec<PathBuf>> {
    let mut cfg: HoldoutConfig = ctx.config_or_default()?;
    if let Some(e) = args.epochs {
        cfg.n_epochs = e;
    }
    if let Some(p) = args.permutations {
        cfg.n_permutations = p;
    }
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
        cfg.ssa.seed = seed;
    }
    let series = read_series(&args.data)?;
    let report = bnise(&series, args.up_to, &cfg)?;
    let csv = ctx.path("bnise.csv");
    let json = ctx.path("bnise.json");
    write_atomic(&csv, report.to_csv().as_bytes())?;
    write_json(&json, &report)?;
    Ok(vec![csv, json])
}

fn parse_sigma(s: &str) -> CliResult<SigmaRule> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SigmaRule::Auto { scale: 1.0 });
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(|value| SigmaRule::Fixed { value })
        .ok_or_else(|| CliError::Validation(format!("--sigma must be `auto` or a positive number, got {s}")))
}

pub fn detect_report(ctx: &Context, args: &DetectArgs) -> CliResult<ChangePointReport> {
    let mut series = read_series(&args.data)?;
    if let Some(ch) = args.channel {
        series = series.channel(ch)?;
    }
    let report = match args.detector {
        DetectorName::Slcd => {
            let mut cfg: SlcdConfig = ctx.config_or_default()?;
            if let Some(n) = args.epochs {
                cfg.n_epochs = n;
            }
            if let Some(k) = args.k {
                cfg.k_clusters = k;
            }
            cfg.validate()?;
            slcd_detect(&series, &make_epochs(&series, cfg.n_epochs)?, &cfg)?
        }
        DetectorName::Cusum => {
            let mut cfg: CusumConfig = ctx.config_or_default()?;
            if let Some(w) = args.window {
                cfg.window = w;
            }
            if let Some(h) = args.threshold {
                cfg.threshold = h;
            }
            if series.n_channels() != 1 {
                return Err(CliError::Validation(format!(
                    "cusum is a univariate method and needs exactly one channel; the input has {}, select one with --channel",
                    series.n_channels()
                )));
            }
            let n = args.epochs.unwrap_or(series.n_samples() / (2 * cfg.window).max(2));
            cusum_detect(&series, &make_epochs(&series, n)?, &cfg)?
        }
        DetectorName::Kl => {
            let mut cfg: KohlLemmConfig = ctx.config_or_default()?;
            if let Some(w) = args.window {
                cfg.window = w;
            }
            if let Some(s) = &args.sigma {
                cfg.sigma = parse_sigma(s)?;
            }
            if let Some(c) = args.cost {
                cfg.cost = c;
            }
            if args.cost_absolute {
                cfg.cost_relative = false;
            }
            if let Some(n) = args.fixed_n {
                cfg.mode = KlMode::FixedChangepoints { n };
            }
            cfg.validate()?;
            let epochs = match args.epochs {
                Some(n) => make_epochs(&series, n)?,
                None => cfg.epoching_for(series.n_samples())?,
            };
            let report = kohlmorgen_lemm_detect(&series, &epochs, &cfg)?;
            if let Some(sigma) = report.sigma {
                eprintln!("sigma = {sigma}");
            }
            report
        }
    };
    Ok(report)
}

pub fn cmd_detect(ctx: &Context, args: &DetectArgs) -> CliResult<Vec<PathBuf>> {
    let report = detect_report(ctx, args)?;
    let json = ctx.path(&format!("{}.json", args.name));
    let csv = ctx.path(&format!("{}.csv", args.name));
    write_json(&json, &report)?;
    write_atomic(&csv, report.to_csv().as_bytes())?;
    Ok(vec![json, csv])
}

#[derive(Debug, Serialize)]
struct Evaluation {
    auc: f64,
    tolerance: usize,
    confusion: Confusion,
    roc: RocCurve,
}

pub fn cmd_evaluate(ctx: &Context, args: &EvaluateArgs) -> CliResult<Vec<PathBuf>> {
    let report: ChangePointReport = read_json(&args.report)?;
    let sidecar: DatasetSidecar = read_json(&args.truth)?;
    let truth = sidecar.truth_flags();
    if truth.len() != report.n_boundaries() {
        return Err(CliError::Validation(format!(
            "report has {} boundaries but the truth has {}; rerun detect with --epochs {}",
            report.n_boundaries(),
            truth.len(),
            truth.len() + 1
        )));
    }
    let roc = roc_from_scores(&report.scores, &truth)?;
    let confusion = confusion_at_boundaries(&report, &truth, args.tolerance)?;
    let mut csv = String::from("fpr,tpr,tau\n");
    for ((f, t), tau) in roc.points.iter().zip(&roc.tau_values) {
        let tau = tau.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{f},{t},{tau}\n"));
    }
    let json_path = ctx.path(&format!("{}.json", args.name));
    let csv_path = ctx.path(&format!("{}.csv", args.name));
    write_json(&json_path, &Evaluation { auc: roc.auc, tolerance: args.tolerance, confusion, roc })?;
    write_atomic(&csv_path, csv.as_bytes())?;
    Ok(vec![json_path, csv_path])
}

pub fn default_plot_name(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plot".into());
    PathBuf::from(format!("{stem}.svg"))
}

pub fn cmd_plot(ctx: &Context, args: &PlotArgs) -> CliResult<Vec<PathBuf>> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.input.display())))?;
    let chart = chart_from_csv(&text)?;
    let title = args.title.clone().unwrap_or_else(|| {
        args.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    let path = ctx.out.join(args.output.clone().unwrap_or_else(|| default_plot_name(&args.input)));
    write_atomic(&path, render_svg(&chart, &title).as_bytes())?;
    Ok(vec![path])
}

pub fn cmd_experiment(ctx: &Context) -> CliResult<PipelineSummary> {
    let path = ctx
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("experiment needs --config".into()))?;
    let config: PipelineConfig = read_json(path)?;
    let config = config.resolved(ctx.seed);
    run_pipeline(&config, &ctx.out)
}
