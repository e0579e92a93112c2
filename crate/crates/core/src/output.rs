//! CSV tables and SVG plots for a finished sweep.
//!
//! All numbers are written with Rust's shortest round-trip formatting, so
//! identical reports produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::SweepReport;
use crate::metrics::{AggregateReport, SplitHistogram};
use crate::simgen::MeanStructure;

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "structure",
    "c1",
    "c2",
    "replications",
    "avg_splits",
    "avg_splits_se",
    "avg_mse_total",
    "avg_mse_lower",
    "avg_mse_upper",
];

/// File-name-safe form of a structure label: `SC_comp(7)` -> `SC_comp_7`.
pub fn file_stem(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            '(' | ',' => out.push('_'),
            ')' => {}
            c if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' => out.push(c),
            _ => out.push('_'),
        }
    }
    out
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_summary(report: &SweepReport, path: &Path) -> Result<()> {
    let paired = !report.pairs.is_empty();
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = SUMMARY_COLUMNS.to_vec();
    header.extend(["avg_mse_total_se", "avg_mse_lower_se", "avg_mse_upper_se"]);
    if paired {
        header.extend(["compromise_structure", "mse_ratio"]);
    }
    w.write_record(&header)?;
    for (i, r) in report.reports.iter().enumerate() {
        let mut rec = vec![
            r.label.clone(),
            r.spec.c1.to_string(),
            r.spec.c2.to_string(),
            r.replications.to_string(),
            r.avg_splits.to_string(),
            r.avg_splits_se.to_string(),
            r.avg_mse_total.to_string(),
            r.avg_mse_lower.to_string(),
            r.avg_mse_upper.to_string(),
            r.avg_mse_total_se.to_string(),
            r.avg_mse_lower_se.to_string(),
            r.avg_mse_upper_se.to_string(),
        ];
        if paired {
            match report.pairs.iter().find(|p| p.het == i) {
                Some(p) => {
                    rec.push(report.reports[p.compromise].label.clone());
                    rec.push(p.mse_ratio.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// Writes `x,count` rows for every non-empty bin.
pub fn write_histogram_csv(hist: &SplitHistogram, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "count"])?;
    for (x, c) in hist {
        w.write_record([x.to_string(), c.to_string()])?;
    }
    finish(w, path)
}

fn write_recovery(report: &SweepReport, path: &Path) -> Result<bool> {
    let rows: Vec<&AggregateReport> = report
        .reports
        .iter()
        .filter(|r| r.jump_recovery.is_some())
        .collect();
    if rows.is_empty() {
        return Ok(false);
    }
    let mut w = csv_writer(path)?;
    w.write_record([
        "structure",
        "c1",
        "c2",
        "replications",
        "radius",
        "avg_pre_prune_splits",
        "avg_splits",
        "pre_recovery_all",
        "post_recovery_all",
        "pre_recovery_lower",
        "post_recovery_lower",
    ])?;
    for r in rows {
        let j = r.jump_recovery.as_ref().expect("filtered");
        w.write_record([
            r.label.clone(),
            r.spec.c1.to_string(),
            r.spec.c2.to_string(),
            r.replications.to_string(),
            j.radius.to_string(),
            j.avg_pre_prune_splits.to_string(),
            r.avg_splits.to_string(),
            j.pre_prune_all.to_string(),
            j.post_prune_all.to_string(),
            j.pre_prune_lower.to_string(),
            j.post_prune_lower.to_string(),
        ])?;
    }
    finish(w, path)?;
    Ok(true)
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#444444"];

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e12 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 170.0;
    const T: f64 = 40.0;
    const B: f64 = 55.0;
    let pts = series.iter().flat_map(|s| &s.points);
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y0 = 0.0_f64.min(y1);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let sy = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (W - R + L) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{L} {T} V{} H{}" fill="none" stroke="black"/>"#,
        H - B,
        W - R
    );
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - B,
            H - B + 5.0,
            H - B + 18.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{L}" y2="{y:.2}" stroke="black"/><line x1="{L}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            L - 5.0,
            W - R,
            L - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (W - R + L) / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (H - B + T) / 2.0,
        (H - B + T) / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { " L" }, sx(x), sy(y));
        }
        if !d.is_empty() {
            let _ = writeln!(
                svg,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#
            );
        }
        let ly = T + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            W - R + 15.0,
            W - R + 40.0,
            W - R + 46.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Split-count-by-x plot over `1..n`, zero-filling empty bins.
pub fn histogram_svg(label: &str, hist: &SplitHistogram, n: usize) -> String {
    let points = (1..n as i64)
        .map(|x| (x as f64, *hist.get(&x).unwrap_or(&0) as f64))
        .collect();
    line_chart(
        &format!("Split locations, {label}"),
        "x",
        "number of splits",
        &[Series {
            name: label.to_string(),
            points,
            dashed: false,
        }],
    )
}

fn mse_by_half_svg(report: &SweepReport, mean: MeanStructure) -> Option<String> {
    let mut het_lo = Vec::new();
    let mut het_hi = Vec::new();
    let mut comp_lo = Vec::new();
    let mut comp_hi = Vec::new();
    for p in &report.pairs {
        let (h, c) = (&report.reports[p.het], &report.reports[p.compromise]);
        if h.spec.mean != mean {
            continue;
        }
        let x = report.jobs[p.het].sweep_value;
        het_lo.push((x, h.avg_mse_lower));
        het_hi.push((x, h.avg_mse_upper));
        comp_lo.push((x, c.avg_mse_lower));
        comp_hi.push((x, c.avg_mse_upper));
    }
    if het_lo.is_empty() {
        return None;
    }
    let series = vec![
        Series { name: "hetero, lower half".into(), points: het_lo, dashed: false },
        Series { name: "hetero, upper half".into(), points: het_hi, dashed: true },
        Series { name: "compromise, lower".into(), points: comp_lo, dashed: false },
        Series { name: "compromise, upper".into(), points: comp_hi, dashed: true },
    ];
    Some(line_chart(
        &format!("Average MSE by half, {mean} mean"),
        "upper-half standard deviation c2",
        "average MSE",
        &series,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every output file for `report` into `out_dir`, creating it if
/// needed, and returns the paths written.
///
/// * `summary.csv`: one row per structure, with `compromise_structure` and
///   `mse_ratio` columns when the sweep pairs structures;
/// * `split_histogram_<structure>.csv` and `.svg`;
/// * `recovery.csv` for step-mean structures;
/// * `mse_by_half_<mean>.svg` for paired sweeps;
/// * `run_config.json`;
/// * `trees_<structure>.jsonl` when trees were kept.
pub fn emit_outputs(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let path = out_dir.join("summary.csv");
    write_summary(report, &path)?;
    written.push(path);

    for r in &report.reports {
        let stem = file_stem(&r.label);
        let path = out_dir.join(format!("split_histogram_{stem}.csv"));
        write_histogram_csv(&r.split_histogram, &path)?;
        written.push(path);
        let path = out_dir.join(format!("split_histogram_{stem}.svg"));
        write_text(&path, &histogram_svg(&r.label, &r.split_histogram, r.spec.n))?;
        written.push(path);
    }

    let path = out_dir.join("recovery.csv");
    if write_recovery(report, &path)? {
        written.push(path);
    }

    for mean in [MeanStructure::Flat, MeanStructure::Step] {
        if let Some(svg) = mse_by_half_svg(report, mean) {
            let path = out_dir.join(format!("mse_by_half_{mean}.svg"));
            write_text(&path, &svg)?;
            written.push(path);
        }
    }

    let meta = serde_json::json!({
        "config": report.config,
        "structures": report.jobs.iter().map(|j| serde_json::json!({
            "label": j.label,
            "role": j.role,
            "sweep_value": j.sweep_value,
            "spec": j.spec,
        })).collect::<Vec<_>>(),
        "jump_radius": report.config.jump_radius,
        "low_cp": crate::experiment::LOW_CP,
    });
    let path = out_dir.join("run_config.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::InvalidState(e.to_string()))?;
    write_text(&path, &(text + "\n"))?;
    written.push(path);

    if let Some(outcomes) = &report.outcomes {
        for (job, outs) in report.jobs.iter().zip(outcomes) {
            let path = out_dir.join(format!("trees_{}.jsonl", file_stem(&job.label)));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = std::io::BufWriter::new(file);
            for o in outs {
                let line = serde_json::to_string(o).map_err(|e| Error::InvalidState(e.to_string()))?;
                writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }

    Ok(written)
}
