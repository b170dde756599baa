//! SVG rendering of the CSV tables written by the other commands.

use std::fmt::Write;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: String,
    /// `(x, y, optional (low, high) band)`.
    pub points: Vec<(f64, f64, Option<(f64, f64)>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    /// Draw the `y = x` chance diagonal.
    pub diagonal: bool,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> CliResult<Table> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| CliError::Validation("empty CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let rows = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Validation(format!("CSV has no column {name:?}")))
    }

    fn num(&self, row: &[String], col: usize) -> Option<f64> {
        row.get(col).and_then(|s| s.parse().ok()).filter(|v: &f64| v.is_finite())
    }

    fn has(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.header.iter().any(|h| h == n))
    }
}

fn grouped(t: &Table, key: usize, x: usize, y: usize, band: Option<(usize, usize)>, prefix: &str) -> Vec<Line> {
    let mut lines: Vec<Line> = Vec::new();
    for row in &t.rows {
        let (Some(xv), Some(yv)) = (t.num(row, x), t.num(row, y)) else { continue };
        let b = band.and_then(|(lo, hi)| Some((t.num(row, lo)?, t.num(row, hi)?)));
        let name = format!("{prefix}{}", row.get(key).map(String::as_str).unwrap_or(""));
        match lines.iter_mut().find(|l| l.name == name) {
            Some(l) => l.points.push((xv, yv, b)),
            None => lines.push(Line { name, points: vec![(xv, yv, b)] }),
        }
    }
    for l in &mut lines {
        l.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    lines
}

/// Builds a chart from any of the known table layouts.
pub fn chart_from_csv(text: &str) -> CliResult<Chart> {
    let t = Table::parse(text)?;
    if t.has(&["grid_value", "condition", "q25", "median", "q75"]) {
        let (g, c, lo, m, hi) = (t.col("grid_value")?, t.col("condition")?, t.col("q25")?, t.col("median")?, t.col("q75")?);
        return Ok(Chart {
            x_label: "grid value".into(),
            y_label: "median AUC".into(),
            lines: grouped(&t, c, g, m, Some((lo, hi)), ""),
            diagonal: false,
        });
    }
    if t.has(&["fpr", "tpr"]) {
        let (x, y) = (t.col("fpr")?, t.col("tpr")?);
        let points = t.rows.iter().filter_map(|r| Some((t.num(r, x)?, t.num(r, y)?, None))).collect();
        return Ok(Chart {
            x_label: "false positive rate".into(),
            y_label: "true positive rate".into(),
            lines: vec![Line { name: "ROC".into(), points }],
            diagonal: true,
        });
    }
    if t.has(&["true_d_s", "candidate_d_s", "mean_p_value"]) {
        let (k, x, y) = (t.col("true_d_s")?, t.col("candidate_d_s")?, t.col("mean_p_value")?);
        return Ok(Chart {
            x_label: "candidate d_s".into(),
            y_label: "mean p-value".into(),
            lines: grouped(&t, k, x, y, None, "true d_s = "),
            diagonal: false,
        });
    }
    if t.has(&["input", "d_s", "auc"]) {
        let (k, x, y) = (t.col("input")?, t.col("d_s")?, t.col("auc")?);
        let mut lines = grouped(&t, k, x, y, None, "");
        if let Some(base) = t.rows.iter().find(|r| r[k] == "baseline").and_then(|r| t.num(r, y)) {
            let xs: Vec<f64> = lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                lines.push(Line { name: "baseline".into(), points: vec![(lo, base, None), (hi, base, None)] });
            }
        }
        return Ok(Chart { x_label: "d_s".into(), y_label: "AUC".into(), lines, diagonal: false });
    }
    if t.has(&["d", "bnise"]) {
        let (x, y) = (t.col("d")?, t.col("bnise")?);
        let points = t.rows.iter().filter_map(|r| Some((t.num(r, x)?, t.num(r, y)?, None))).collect();
        return Ok(Chart {
            x_label: "d".into(),
            y_label: "BNISE".into(),
            lines: vec![Line { name: "BNISE".into(), points }],
            diagonal: false,
        });
    }
    if t.has(&["d_s", "p_value"]) {
        let (x, y) = (t.col("d_s")?, t.col("p_value")?);
        let points = t.rows.iter().filter_map(|r| Some((t.num(r, x)?, t.num(r, y)?, None))).collect();
        return Ok(Chart {
            x_label: "candidate d_s".into(),
            y_label: "p-value".into(),
            lines: vec![Line { name: "p-value".into(), points }],
            diagonal: false,
        });
    }
    Err(CliError::Validation(format!("unrecognized CSV columns: {}", t.header.join(","))))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const M: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

pub fn render_svg(chart: &Chart, title: &str) -> String {
    let all = || chart.lines.iter().flat_map(|l| l.points.iter());
    let (x0, x1) = if chart.diagonal { (0.0, 1.0) } else { range(all().map(|p| p.0)) };
    let (y0, y1) = if chart.diagonal {
        (0.0, 1.0)
    } else {
        range(all().flat_map(|p| [p.1, p.2.map_or(p.1, |b| b.0), p.2.map_or(p.1, |b| b.1)]))
    };
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{} H{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="11">{fx:.3}</text>"#,
            sx(fx),
            H - M + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">{fy:.3}</text>"#,
            M - 6.0,
            sy(fy) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&chart.y_label)
    );
    if chart.diagonal {
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="grey" stroke-dasharray="4 4"/>"#,
            sx(0.0),
            sy(0.0),
            sx(1.0),
            sy(1.0)
        );
    }
    for (i, line) in chart.lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = line
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| format!("{}{:.2} {:.2}", if k == 0 { "M" } else { "L" }, sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        for p in &line.points {
            if let Some((lo, hi)) = p.2 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    sy(lo),
                    sy(hi),
                    x = sx(p.0)
                );
            }
        }
        let ly = M + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{}</text>"#,
            W - M - 120.0,
            escape(&line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}
