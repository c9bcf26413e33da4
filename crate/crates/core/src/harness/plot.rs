//! Minimal SVG line plots of aggregate curves.
//!
//! Each figure has two panels: the full horizon and a zoom on `t <= 5000`.
//! Shaded bands are one standard error around the mean.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::AggregateCurve;

pub const ZOOM_LIMIT: u64 = 5000;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 90.0;
const LEGEND_H: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Regret,
    Collisions,
}

impl PlotKind {
    fn label(self) -> &'static str {
        match self {
            PlotKind::Regret => "cumulative regret",
            PlotKind::Collisions => "cumulative collisions",
        }
    }

    fn file_name(self) -> &'static str {
        match self {
            PlotKind::Regret => "regret.svg",
            PlotKind::Collisions => "collisions.svg",
        }
    }

    fn series(self, c: &AggregateCurve) -> (&[f64], &[f64]) {
        match self {
            PlotKind::Regret => (&c.mean_regret, &c.stderr_regret),
            PlotKind::Collisions => (&c.mean_collisions, &c.stderr_collisions),
        }
    }
}

/// Round tick step giving about five ticks over `[0, max]`.
fn tick_step(max: f64) -> f64 {
    if max <= 0.0 {
        return 1.0;
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn panel(svg: &mut String, curves: &[AggregateCurve], kind: PlotKind, x0: f64, t_max: u64, title: &str) {
    let y0 = MARGIN_T;
    let t_hi = curves
        .iter()
        .flat_map(|c| c.t.iter().copied().filter(|&t| t <= t_max))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_hi = curves
        .iter()
        .flat_map(|c| {
            let (m, s) = kind.series(c);
            c.t.iter()
                .zip(m.iter().zip(s))
                .filter(|(&t, _)| t <= t_max)
                .map(|(_, (m, s))| m + s)
        })
        .fold(0.0f64, f64::max);
    let y_step = tick_step(y_hi);
    let y_top = if y_hi > 0.0 { (y_hi / y_step).ceil() * y_step } else { 1.0 };
    let sx = |t: f64| x0 + t / t_hi * PANEL_W;
    let sy = |v: f64| y0 + PANEL_H - v / y_top * PANEL_H;

    let _ = writeln!(
        svg,
        r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{title}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 12.0
    );
    let x_step = tick_step(t_hi);
    let mut t = 0.0;
    while t <= t_hi + 1e-9 {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
            y0 + PANEL_H,
            y0 + PANEL_H + 5.0,
            y0 + PANEL_H + 18.0,
            fmt_tick(t)
        );
        t += x_step;
    }
    let mut v = 0.0;
    while v <= y_top + 1e-9 {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            fmt_tick(v)
        );
        v += y_step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">time step (PRI)</text>"#,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 36.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle" font-size="12">{}</text>"#,
        x0 - 52.0,
        y0 + PANEL_H / 2.0,
        kind.label()
    );

    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let (mean, se) = kind.series(c);
        let pts: Vec<(f64, f64, f64)> = c
            .t
            .iter()
            .zip(mean.iter().zip(se))
            .filter(|(&t, _)| t <= t_max)
            .map(|(&t, (&m, &s))| (t as f64, m, s))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &(t, m, s) in &pts {
            let _ = write!(band, "{:.1},{:.1} ", sx(t), sy(m + s));
        }
        for &(t, m, s) in pts.iter().rev() {
            let _ = write!(band, "{:.1},{:.1} ", sx(t), sy((m - s).max(0.0)));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts.iter().map(|&(t, m, _)| format!("{:.1},{:.1}", sx(t), sy(m))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-algorithm="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            c.algorithm.as_str(),
            line.join(" ")
        );
    }
}

/// Renders one figure (full-horizon and zoom panels) as an SVG document.
pub fn render_svg(curves: &[AggregateCurve], kind: PlotKind, title: &str) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Usage("no curves to plot".into()));
    }
    let width = MARGIN_L + 2.0 * PANEL_W + GAP + 30.0;
    let height = MARGIN_T + PANEL_H + 50.0 + LEGEND_H + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let full = curves.iter().flat_map(|c| c.t.last().copied()).max().unwrap_or(0);
    panel(&mut svg, curves, kind, MARGIN_L, full.max(1), &format!("{title}: {}", kind.label()));
    panel(
        &mut svg,
        curves,
        kind,
        MARGIN_L + PANEL_W + GAP,
        ZOOM_LIMIT,
        &format!("zoom, t &lt;= {ZOOM_LIMIT}"),
    );

    // legend: one entry per series, laid out in a row
    let ly = MARGIN_T + PANEL_H + 60.0;
    let slot = (2.0 * PANEL_W + GAP) / curves.len() as f64;
    for (k, c) in curves.iter().enumerate() {
        let x = MARGIN_L + k as f64 * slot;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{x:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}" font-size="12">{} (n={})</text></g>"#,
            x + 24.0,
            x + 30.0,
            ly + 4.0,
            c.algorithm.display_name(),
            c.n_runs
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `regret.svg` and `collisions.svg` into `dir`.
pub fn emit_plots(curves: &[AggregateCurve], dir: &Path, title: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for kind in [PlotKind::Regret, PlotKind::Collisions] {
        let svg = render_svg(curves, kind, title)?;
        let path = dir.join(kind.file_name());
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(files)
}
