//! Minimal self-contained SVG line charts of report metrics against n.
//!
//! Plots are a convenience for eyeballing runs; the CSV stays the record.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::RiskReport;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Aggregate metrics worth plotting: rows without a replicate index whose name
/// mentions a risk or a ratio.
pub fn default_metrics(report: &RiskReport) -> Vec<String> {
    let mut names: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.replicate.is_none() && (r.metric.contains("ratio") || r.metric.contains("risk")))
        .map(|r| r.metric.clone())
        .collect();
    names.sort();
    names.dedup();
    names
}

fn label(p: Option<f64>, c: Option<f64>) -> String {
    match (p, c) {
        (Some(p), Some(c)) => format!("p = {p}, C = {c}"),
        (Some(p), None) => format!("p = {p}"),
        _ => "all".to_string(),
    }
}

/// Renders `metric` against n, one line per (p, C) combination, averaging
/// duplicate points.
pub fn render_metric(report: &RiskReport, metric: &str) -> Result<String> {
    let mut series: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in report.rows.iter().filter(|r| r.metric == metric && r.value.is_finite()) {
        let point = series.entry(label(r.p, r.c)).or_default().entry(r.n).or_insert((0.0, 0));
        point.0 += r.value;
        point.1 += 1;
    }
    if series.is_empty() {
        return Err(Error::domain(format!("no finite values for metric `{metric}`")));
    }
    let points: Vec<(String, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|(n, (s, c))| (n as f64, s / c as f64)).collect()))
        .collect();

    let all = points.iter().flat_map(|(_, p)| p.iter());
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        xlo = xlo.min(x.ln());
        xhi = xhi.max(x.ln());
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    if xhi - xlo < 1e-12 {
        xlo -= 0.5;
        xhi += 0.5;
    }
    ylo = ylo.min(0.0);
    if yhi - ylo < 1e-300 {
        yhi = ylo + 1.0;
    }
    yhi += 0.05 * (yhi - ylo);

    let (ml, mr, mt, mb) = MARGIN;
    let px = |x: f64| ml + (x.ln() - xlo) / (xhi - xlo) * (W - ml - mr);
    let py = |y: f64| H - mb - (y - ylo) / (yhi - ylo) * (H - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(metric));
    let _ = writeln!(
        svg,
        r#"<path d="M{ml} {mt} V{} H{}" fill="none" stroke="black"/>"#,
        H - mb,
        W - mr
    );
    for i in 0..=4 {
        let y = ylo + (yhi - ylo) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            ml - 6.0,
            py(y) + 4.0,
            tick(y)
        );
    }
    let mut ns: Vec<f64> = points.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    for n in &ns {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{n}</text>"#,
            px(*n),
            H - mb + 18.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, W / 2.0, H - 8.0);

    for (i, (name, pts)) in points.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = mt + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            W - mr - 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes one chart per metric into `dir` (all of [`default_metrics`] when
/// `metrics` is empty). Everything is rendered before any file is created,
/// so a failure leaves the directory untouched.
pub fn write_plots(report: &RiskReport, metrics: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::domain("report has no rows to plot"));
    }
    let metrics = if metrics.is_empty() { default_metrics(report) } else { metrics.to_vec() };
    if metrics.is_empty() {
        return Err(Error::domain("report has no aggregate risk or ratio metrics to plot"));
    }
    let rendered = metrics
        .iter()
        .map(|m| Ok((m, render_metric(report, m)?)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (m, svg) in rendered {
        let safe: String = m.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
        let path = dir.join(format!("{safe}.svg"));
        std::fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}
