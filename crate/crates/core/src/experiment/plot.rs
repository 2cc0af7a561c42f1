//! Self-contained SVG line plots. Output depends only on the input data,
//! so fixed-seed runs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::phase::{PhaseResults, SummaryRow};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
/// Values below this are drawn at the floor of logarithmic axes.
const LOG_FLOOR: f64 = 1e-16;

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(lo: f64, hi: f64, log: bool) -> Self {
        let (lo, hi) = if log {
            (lo.max(LOG_FLOOR).log10(), hi.max(LOG_FLOOR).log10())
        } else {
            (lo, hi)
        };
        if hi - lo < 1e-12 {
            // Single value: widen symmetrically.
            let pad = if log { 0.5 } else { lo.abs().max(1.0) * 0.5 };
            Self {
                lo: lo - pad,
                hi: hi + pad,
                log,
            }
        } else {
            Self { lo, hi, log }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log {
            v.max(LOG_FLOOR).log10()
        } else {
            v
        };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + self.frac(v) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - self.frac(v) * (HEIGHT - TOP - BOTTOM)
    }

    /// Decade ticks for log axes, five even steps otherwise.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|e| 10f64.powi(e))
                .collect()
        } else {
            (0..=5)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0)
                .collect()
        }
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[allow(clippy::too_many_arguments)]
fn render(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    x: Axis,
    y: Axis,
    xticks: &[f64],
    series: &[Series],
    markers: bool,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        x1 - x0,
        y0 - y1
    );
    for &t in xticks {
        let px = x.x(t);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/>"##,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(t, false)
        );
    }
    for t in y.ticks() {
        let py = y.y(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="#ddd"/>"##,
            x0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick_label(t, y.log)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", x.x(a), y.y(b)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        if markers || pts.len() == 1 {
            for &(a, b) in &ser.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    x.x(a),
                    y.y(b)
                );
            }
        }
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 12.0,
            x1 + 32.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 38.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn per_scheme(
    summary: &[SummaryRow],
    schemes: &[String],
    value: impl Fn(&SummaryRow) -> f64,
) -> Vec<Series> {
    schemes
        .iter()
        .map(|sch| Series {
            label: sch.clone(),
            points: summary
                .iter()
                .filter(|s| &s.scheme == sch)
                .map(|s| (s.m as f64, value(s)))
                .collect(),
        })
        .collect()
}

fn m_axis(summary: &[SummaryRow]) -> (Axis, Vec<f64>) {
    let mut ms: Vec<f64> = summary.iter().map(|s| s.m as f64).collect();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    let axis = Axis::new(ms[0], ms[ms.len() - 1], true);
    (axis, ms)
}

/// Median relative error against `m` per scheme, both axes logarithmic.
pub fn rre_plot(summary: &[SummaryRow], schemes: &[String]) -> Result<String> {
    if summary.is_empty() {
        return Err(Error::InvalidArgument("no results to plot".into()));
    }
    let (x, ms) = m_axis(summary);
    let lo = summary
        .iter()
        .map(|s| s.median_rre)
        .fold(f64::INFINITY, f64::min);
    let hi = summary.iter().map(|s| s.median_rre).fold(0.0, f64::max);
    let y = Axis::new(lo, hi, true);
    let series = per_scheme(summary, schemes, |s| s.median_rre);
    Ok(render(
        "Median relative error",
        "m (log scale)",
        "median rre",
        x,
        y,
        &ms,
        &series,
        true,
    ))
}

/// Success proportion against `m` per scheme, logarithmic `m` axis.
pub fn success_plot(summary: &[SummaryRow], schemes: &[String]) -> Result<String> {
    if summary.is_empty() {
        return Err(Error::InvalidArgument("no results to plot".into()));
    }
    let (x, ms) = m_axis(summary);
    let y = Axis::new(0.0, 1.0, false);
    let series = per_scheme(summary, schemes, |s| s.success_rate);
    Ok(render(
        "Successful recoveries",
        "m (log scale)",
        "success proportion",
        x,
        y,
        &ms,
        &series,
        true,
    ))
}

/// Local coherences by row index on a logarithmic scale.
pub fn coherence_plot(alpha: &[f64]) -> Result<String> {
    if alpha.is_empty() {
        return Err(Error::InvalidArgument("no coherences to plot".into()));
    }
    let n = alpha.len();
    let x = Axis::new(1.0, n as f64, false);
    let positive = alpha.iter().copied().filter(|&a| a > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    let (lo, hi) = if hi > 0.0 { (lo, hi) } else { (LOG_FLOOR, 1.0) };
    let y = Axis::new(lo, hi, true);
    let series = [Series {
        label: "alpha".into(),
        points: alpha
            .iter()
            .enumerate()
            .map(|(j, &a)| ((j + 1) as f64, a.max(lo)))
            .collect(),
    }];
    let xticks: Vec<f64> = x.ticks();
    Ok(render(
        "Local coherences",
        "row index",
        "alpha (log scale)",
        x,
        y,
        &xticks,
        &series,
        false,
    ))
}

/// Writes `rre_vs_m.svg`, `success_vs_m.svg` and, when coherences are
/// present, `coherence.svg` into `dir`.
pub fn emit_plots(results: &PhaseResults, dir: &Path) -> Result<Vec<PathBuf>> {
    if results.rows.is_empty() {
        return Err(Error::InvalidArgument("no results to plot".into()));
    }
    std::fs::create_dir_all(dir)?;
    let summary = results.summary();
    let mut out = Vec::new();
    let mut write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        out.push(path);
        Ok(())
    };
    write("rre_vs_m.svg", rre_plot(&summary, &results.schemes)?)?;
    write(
        "success_vs_m.svg",
        success_plot(&summary, &results.schemes)?,
    )?;
    if let Some(c) = &results.coherence {
        write("coherence.svg", coherence_plot(&c.alpha)?)?;
    }
    Ok(out)
}
