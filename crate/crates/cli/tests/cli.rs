use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ssacpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssacpd")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ssacpd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str) -> PathBuf {
    ok(&[
        "--seed", "21", "--out", path(dir), "generate", "--dim", "4", "--d-s", "2", "--d-n", "2", "--power", "2",
        "--n-epochs", "30", "--epoch-len", "200", "--name", name,
    ]);
    dir.join(format!("{name}.csv"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn generate_writes_csv_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let csv = generate(dir.path(), "a");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 4);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6000);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
    assert!(dir.path().join("a.json").exists());
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = generate(dir.path(), "a");
    let b = generate(dir.path(), "b");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn invalid_dimensions_fail_before_writing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never");
    let res = ssacpd(&["--out", path(&out), "generate", "--dim", "4", "--d-s", "3", "--d-n", "3"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("d_s + d_n"));
    assert!(!out.exists());
}

#[test]
fn slcd_report_has_one_entry_per_boundary() {
    let dir = TempDir::new().unwrap();
    let csv = generate(dir.path(), "data");
    ok(&["--out", path(dir.path()), "detect", "--data", path(&csv), "--detector", "slcd", "--epochs", "200", "--k", "5"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["boundaries"].as_array().unwrap().len(), 199);
    assert_eq!(report["scores"].as_array().unwrap().len(), 199);
}

#[test]
fn cusum_needs_one_channel() {
    let dir = TempDir::new().unwrap();
    let csv = generate(dir.path(), "data");
    let res = ssacpd(&["--out", path(dir.path()), "detect", "--data", path(&csv), "--detector", "cusum"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("univariate"));

    ok(&["--seed", "2", "--out", path(dir.path()), "fit-ssa", "--data", path(&csv), "--d-s", "3", "--extract"]);
    let single = dir.path().join("sources_n.csv");
    let header = fs::read_to_string(&single).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 1);
    ok(&[
        "--out", path(dir.path()), "detect", "--data", path(&single), "--detector", "cusum", "--epochs", "30",
        "--window", "50", "--name", "cusum",
    ]);
    assert!(dir.path().join("cusum.json").exists());
}

#[test]
fn kl_logs_sigma() {
    let dir = TempDir::new().unwrap();
    let csv = generate(dir.path(), "data");
    let res = ok(&[
        "--out", path(dir.path()), "detect", "--data", path(&csv), "--detector", "kl", "--sigma", "auto", "--epochs", "30",
    ]);
    let stderr = String::from_utf8_lossy(&res.stderr);
    let line = stderr.lines().find(|l| l.starts_with("sigma = ")).expect("sigma on stderr");
    assert!(line["sigma = ".len()..].trim().parse::<f64>().unwrap() > 0.0);
}

#[test]
fn evaluate_rejects_mismatched_epochings() {
    let dir = TempDir::new().unwrap();
    let csv = generate(dir.path(), "data");
    let truth = dir.path().join("data.json");
    ok(&["--out", path(dir.path()), "detect", "--data", path(&csv), "--detector", "slcd", "--epochs", "30"]);
    ok(&["--out", path(dir.path()), "evaluate", "--report", path(&dir.path().join("report.json")), "--truth", path(&truth)]);
    assert!(dir.path().join("roc.csv").exists());

    ok(&["--out", path(dir.path()), "detect", "--data", path(&csv), "--detector", "slcd", "--epochs", "20", "--name", "r20"]);
    let res = ssacpd(&["--out", path(dir.path()), "evaluate", "--report", path(&dir.path().join("r20.json")), "--truth", path(&truth)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--epochs 30"));
}

fn stage_counts(stderr: &str) -> Vec<(String, usize, usize)> {
    stderr
        .lines()
        .filter_map(|l| {
            let (stage, rest) = l.split_once(": ")?;
            let mut nums = rest.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty());
            Some((stage.to_string(), nums.next()?.parse().ok()?, nums.next()?.parse().ok()?))
        })
        .collect()
}

#[test]
fn pipeline_rerun_only_recomputes_evaluation() {
    let dir = TempDir::new().unwrap();
    let config = repo_config("quick.json");
    ok(&["--config", path(&config), "--out", path(dir.path()), "experiment"]);
    let before = fs::read(dir.path().join("order_selection.csv")).unwrap();
    fs::remove_file(dir.path().join("experiment.csv")).unwrap();

    let res = ok(&["--config", path(&config), "--out", path(dir.path()), "experiment"]);
    let counts = stage_counts(&String::from_utf8_lossy(&res.stderr));
    assert!(!counts.is_empty());
    for (stage, computed, reused) in counts {
        if stage == "evaluate" {
            assert!(computed > 0);
        } else {
            assert_eq!(computed, 0, "{stage} recomputed");
            assert!(reused > 0, "{stage}");
        }
    }
    assert!(dir.path().join("experiment.csv").exists());
    assert_eq!(fs::read(dir.path().join("order_selection.csv")).unwrap(), before);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"format_version": 1, "seed": 1, "experimnt": {}}"#).unwrap();
    let res = ssacpd(&["--config", path(&config), "--out", path(&dir.path().join("out")), "experiment"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("experimnt"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn experiment_needs_a_config() {
    let dir = TempDir::new().unwrap();
    let res = ssacpd(&["--out", path(dir.path()), "experiment"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let res = ssacpd(&["--out", path(dir.path()), "detect", "--data", "/nonexistent/data.csv", "--detector", "slcd"]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn plot_renders_svg() {
    let dir = TempDir::new().unwrap();
    let csv = generate(dir.path(), "data");
    ok(&["--out", path(dir.path()), "detect", "--data", path(&csv), "--detector", "slcd", "--epochs", "30"]);
    ok(&[
        "--out", path(dir.path()), "evaluate", "--report", path(&dir.path().join("report.json")), "--truth",
        path(&dir.path().join("data.json")),
    ]);
    let svg = dir.path().join("roc.svg");
    ok(&["plot", "--input", path(&dir.path().join("roc.csv")), "--output", path(&svg), "--title", "ROC"]);
    let text = fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("ROC"));

    let res = ssacpd(&["plot", "--input", path(&dir.path().join("report.csv"))]);
    assert_eq!(res.status.code(), Some(1));
}
