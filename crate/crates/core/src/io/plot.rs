//! Plot data: CSV tables with `# key=value` metadata lines and quick SVG
//! renderings.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{CorrelationHistogram, DecayHistogram, FitReport, Model, PeakAreas};
use crate::analysis::models::Lifetime;
use crate::error::{Error, Result};

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn metadata(out: &mut String, meta: &[(&str, String)]) {
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
}

/// Generic table: one header row, then rows of numbers.
pub fn write_curve_csv(path: &Path, columns: &[&str], rows: &[Vec<f64>], meta: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    metadata(&mut out, meta);
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| if v.is_nan() { String::new() } else { format!("{v}") }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Expected counts per bin: the mean outer-side-peak shape repeated at every
/// peak, with the zero-delay copy scaled by `g2`.
pub fn peak_template(hist: &CorrelationHistogram, period_ps: f64, areas: &PeakAreas, n_side: usize, g2: f64) -> Vec<f64> {
    let outer: Vec<i64> = areas.outer(n_side).iter().map(|(k, _)| *k).collect();
    let half = areas.window_ps / 2.0;
    let bin = hist.bin_width_ps as f64;
    let slots = (areas.window_ps / bin).ceil() as usize + 1;
    let mut shape = vec![0.0; slots];
    let mut hits = vec![0u32; slots];
    let offset_slot = |tau: f64, k: i64| ((tau - k as f64 * period_ps + half) / bin).floor();
    for (i, &c) in hist.counts.iter().enumerate() {
        let tau = hist.bin_centre(i);
        let k = (tau / period_ps).round() as i64;
        if outer.contains(&k) && (tau - k as f64 * period_ps).abs() < half {
            let s = offset_slot(tau, k) as usize;
            shape[s.min(slots - 1)] += c as f64;
            hits[s.min(slots - 1)] += 1;
        }
    }
    for (s, h) in shape.iter_mut().zip(&hits) {
        if *h > 0 {
            *s /= *h as f64;
        }
    }
    hist.counts
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let tau = hist.bin_centre(i);
            let k = (tau / period_ps).round() as i64;
            if (tau - k as f64 * period_ps).abs() >= half {
                return 0.0;
            }
            let s = (offset_slot(tau, k) as usize).min(slots - 1);
            shape[s] * if k == 0 { g2 } else { 1.0 }
        })
        .collect()
}

/// `tau_ps` is the left bin edge.
pub fn write_histogram_csv(path: &Path, hist: &CorrelationHistogram, fit: Option<&[f64]>, meta: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    let mut all = vec![
        ("bin_width_ps", hist.bin_width_ps.to_string()),
        ("singles_a", hist.singles.0.to_string()),
        ("singles_b", hist.singles.1.to_string()),
        ("acquisition_ps", hist.acquisition_ps.to_string()),
    ];
    all.extend(meta.iter().map(|(k, v)| (*k, v.clone())));
    metadata(&mut out, &all);
    out.push_str(if fit.is_some() { "tau_ps,counts,fit\n" } else { "tau_ps,counts\n" });
    for (i, c) in hist.counts.iter().enumerate() {
        match fit {
            Some(f) => {
                let _ = writeln!(out, "{},{},{:.6}", hist.bin_left(i), c, f[i]);
            }
            None => {
                let _ = writeln!(out, "{},{}", hist.bin_left(i), c);
            }
        }
    }
    write_file(path, &out)
}

/// Lifetime model evaluated at each bin centre inside `window` (ps).
pub fn decay_fit_curve(hist: &DecayHistogram, fit: &FitReport, window: (f64, f64)) -> Vec<f64> {
    let names = Lifetime.param_names();
    let p: Vec<f64> = names.iter().map(|n| fit.value(n)).collect();
    (0..hist.counts.len())
        .map(|k| {
            let t = hist.bin_centre(k);
            if t >= window.0 && t < window.1 {
                Lifetime.eval(t * 1e-3, &p)
            } else {
                f64::NAN
            }
        })
        .collect()
}

pub fn write_decay_csv(path: &Path, hist: &DecayHistogram, fit: Option<&[f64]>, meta: &[(&str, String)]) -> Result<()> {
    let rows: Vec<Vec<f64>> = hist
        .counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let mut row = vec![k as f64 * hist.bin_width_ps, c as f64];
            if let Some(f) = fit {
                row.push(f[k]);
            }
            row
        })
        .collect();
    let columns: &[&str] = if fit.is_some() { &["t_ps", "counts", "fit"] } else { &["t_ps", "counts"] };
    write_curve_csv(path, columns, &rows, meta)
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
    /// Joined by a line instead of drawn as dots.
    pub line: bool,
}

/// Minimal SVG plot with linear axes.
pub fn write_svg(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const M: f64 = 60.0;
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().filter(finite).copied()).collect();
    if all.is_empty() {
        return Err(Error::domain("nothing to plot"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, 0.0f64, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<path d="M{M} {} L{} {} M{M} {} L{M} {M}" stroke="black" fill="none"/>"#, H - M, W - M, H - M, H - M);
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, sx(fx), H - M + 16.0, tick(fx));
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#, M - 4.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (n, s) in series.iter().enumerate() {
        let colour = colours[n % colours.len()];
        let pts: Vec<&(f64, f64)> = s.points.iter().filter(finite).collect();
        if s.line {
            let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" stroke="{colour}" fill="none" stroke-width="1.2"/>"#, path.join(" "));
        } else {
            let stride = pts.len().div_ceil(4000).max(1);
            for p in pts.iter().step_by(stride) {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{colour}"/>"#, sx(p.0), sy(p.1));
            }
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" fill="{colour}">{}</text>"#, W - M - 150.0, M + 16.0 * n as f64, escape(s.label));
    }
    out.push_str("</svg>\n");
    write_file(path, &out)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn parse_error(path: &Path, offset: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse { offset: offset as u64, message: format!("{}: {message}", path.display()) }
}

/// `# key=value` metadata and numeric rows of a CSV written by this module.
/// The header row is skipped; empty cells read as NaN.
pub fn read_csv(path: &Path) -> Result<(Vec<(String, String)>, Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut meta = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    let mut n = 0;
    for raw in text.split_inclusive('\n') {
        let start = n;
        n += raw.len();
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(kv) = line.strip_prefix('#') {
            if let Some((k, v)) = kv.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if header.is_empty() {
            header = line.split(',').map(|c| c.trim().to_string()).collect();
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                let c = c.trim();
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>().map_err(|e| parse_error(path, start, format!("{c:?}: {e}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(parse_error(path, start, format!("expected {} columns, found {}", header.len(), row.len())));
        }
        rows.push(row);
    }
    Ok((meta, header, rows))
}

/// Reads a histogram written by [`write_histogram_csv`].
pub fn read_histogram_csv(path: &Path) -> Result<CorrelationHistogram> {
    let (meta, header, rows) = read_csv(path)?;
    if header.first().map(String::as_str) != Some("tau_ps") || header.get(1).map(String::as_str) != Some("counts") {
        return Err(parse_error(path, 0, "expected columns tau_ps,counts"));
    }
    let get = |key: &str| meta.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.parse::<u64>().ok());
    let bin = match get("bin_width_ps") {
        Some(b) => b,
        None if rows.len() >= 2 => (rows[1][0] - rows[0][0]) as u64,
        None => return Err(parse_error(path, 0, "cannot infer the bin width")),
    };
    if rows.is_empty() || bin == 0 {
        return Err(parse_error(path, 0, "histogram is empty"));
    }
    let tau_min = rows[0][0] as i64;
    for (k, r) in rows.iter().enumerate() {
        if r[0] as i64 != tau_min + k as i64 * bin as i64 {
            return Err(parse_error(path, 0, format!("bin {k} is not contiguous with the previous one")));
        }
    }
    Ok(CorrelationHistogram {
        bin_width_ps: bin,
        tau_min_ps: tau_min,
        tau_max_ps: tau_min + (rows.len() as u64 * bin) as i64,
        counts: rows.iter().map(|r| r[1] as u64).collect(),
        singles: (get("singles_a").unwrap_or(0), get("singles_b").unwrap_or(0)),
        acquisition_ps: get("acquisition_ps").unwrap_or(0),
    })
}
