//! Tables, JSON summary and log-log plot of a sweep.

use crate::sweep::{SweepResult, SweepRow};
use std::fmt::Write as _;
use std::path::Path;
use vfpns::{Error, Result};

pub const FITS_HEADER: &str = "quantity,slope,intercept,residual,points,excluded";
pub const CONSTANTS_HEADER: &str = "quantity,c_fit,residual,spread";

/// Series drawn in the plot.
const SERIES: [(&str, fn(&SweepRow) -> f64, &str); 4] = [
    ("e0", |r| r.e0, "#1f77b4"),
    ("e1", |r| r.e1, "#ff7f0e"),
    ("bl_rho", |r| r.bl_rho, "#2ca02c"),
    ("rho_l1", |r| r.rho_l1, "#d62728"),
];

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn rates_csv(s: &SweepResult) -> String {
    let mut out = String::from(SweepRow::CSV_HEADER);
    out.push('\n');
    for r in &s.rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn fits_csv(s: &SweepResult) -> String {
    let mut out = format!("{FITS_HEADER}\n");
    for f in &s.fits {
        if let Some(fit) = &f.fit {
            let _ = writeln!(out, "{},{:e},{:e},{:e},{},{}", f.quantity, fit.slope, fit.intercept, fit.residual, fit.points, f.excluded);
        }
    }
    out
}

pub fn constants_csv(s: &SweepResult) -> String {
    let mut out = format!("{CONSTANTS_HEADER}\n");
    for c in &s.constants {
        let _ = writeln!(out, "{},{:e},{:e},{:e}", c.quantity, c.c_fit, c.residual, c.spread);
    }
    out
}

/// Log-log plot: one polyline per series with data, and the fitted line
/// of each series as a dashed `<line>`.
pub fn rates_svg(s: &SweepResult) -> String {
    let (w, h, pad) = (640.0, 480.0, 60.0);
    let pts: Vec<(f64, f64)> = s
        .rows
        .iter()
        .flat_map(|r| SERIES.iter().map(move |(_, get, _)| (r.eps, get(r))))
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|(e, q)| (e.log10(), q.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (-2.0, 0.0, -4.0, 0.0);
    if !pts.is_empty() {
        x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor();
        x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil();
        y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">log10 eps</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(out, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">log10 error</text>"#, h / 2.0, h / 2.0);
    for (k, (name, get, colour)) in SERIES.iter().enumerate() {
        let line: Vec<String> = s
            .rows
            .iter()
            .filter(|r| r.eps > 0.0 && get(r) > 0.0)
            .map(|r| format!("{:.2},{:.2}", sx(r.eps.log10()), sy(get(r).log10())))
            .collect();
        let _ = writeln!(out, r#"<polyline id="{name}" fill="none" stroke="{colour}" points="{}"/>"#, line.join(" "));
        if let Some(fit) = s.fit(name) {
            let y = |x: f64| (fit.slope * x * std::f64::consts::LN_10 + fit.intercept) / std::f64::consts::LN_10;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-dasharray="4 3"/>"#,
                sx(x0),
                sy(y(x0)),
                sx(x1),
                sy(y(x1))
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{colour}">{name}</text>"#,
            w - pad + 5.0,
            pad + 15.0 * (k as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `rates.csv`, `fits.csv`, `constants.csv`, `summary.json` and
/// `rates.svg` into `dir`. Output depends only on `s`.
pub fn emit_report(s: &SweepResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("rates.csv"), &rates_csv(s))?;
    write(&dir.join("fits.csv"), &fits_csv(s))?;
    write(&dir.join("constants.csv"), &constants_csv(s))?;
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(s)?)?;
    write(&dir.join("rates.svg"), &rates_svg(s))
}
