//! Static SVG charts: metric-vs-axis line charts and received-plane scatters.
//!
//! Output depends only on the input numbers, so charts diff cleanly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::sim::MetricsRecord;
use crate::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 130.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Scatter,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Evenly spaced "nice" ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders a chart. With `db_axis`, y tick labels also show `10·log10(y)`.
pub fn render(
    kind: PlotKind,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    db_axis: bool,
) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidArgument(
            "a plot needs at least one non-empty series".into(),
        ));
    }
    let (mut x0, mut x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (mut y0, mut y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    if kind == PlotKind::Scatter {
        // same range on both axes so the received plane keeps its shape
        (x0, y0) = (x0.min(y0), x0.min(y0));
        (x1, y1) = (x1.max(y1), x1.max(y1));
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let label = if db_axis && t > 0.0 {
            format!("{} ({:.1} dB)", fmt_tick(t), 10.0 * t.log10())
        } else {
            fmt_tick(t)
        };
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            label
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match kind {
            PlotKind::Line => {
                let pts: Vec<String> = ser
                    .points
                    .iter()
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    pts.join(" ")
                );
                for &(x, y) in ser
                    .points
                    .iter()
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
            }
            PlotKind::Scatter => {
                for &(x, y) in ser
                    .points
                    .iter()
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{color}" fill-opacity="0.6"/>"#,
                        sx(x),
                        sy(y),
                        if i == 0 { 4 } else { 2 }
                    );
                }
            }
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{color}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 10.0,
            lx + 18.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(
    kind: PlotKind,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    path: &Path,
) -> Result<()> {
    let svg = render(
        kind,
        title,
        x_label,
        y_label,
        series,
        kind == PlotKind::Line,
    )?;
    fs::write(path, svg)?;
    Ok(())
}

/// Average total power against whichever of SNR, `d0` or `Nt` varies,
/// one series per remaining combination.
pub fn records_chart(records: &[MetricsRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to plot".into()));
    }
    let varies = |f: &dyn Fn(&MetricsRecord) -> f64| records.iter().any(|r| f(r) != f(&records[0]));
    type Axis = Box<dyn Fn(&MetricsRecord) -> f64>;
    let (axis, x_of): (&str, Axis) = if varies(&|r| r.snr_db) {
        ("SNR (dB)", Box::new(|r| r.snr_db))
    } else if varies(&|r| r.d0) {
        ("d0", Box::new(|r| r.d0))
    } else {
        ("Nt", Box::new(|r| r.nt as f64))
    };
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let mut label = format!("M={} Nr={} {}", r.order, r.nr, r.design);
        if axis != "Nt" {
            label.push_str(&format!(" Nt={}", r.nt));
        }
        if axis != "d0" && r.d0 != 0.0 {
            label.push_str(&format!(" d0={}", r.d0));
        }
        if axis != "SNR (dB)" {
            label.push_str(&format!(" {}dB", r.snr_db));
        }
        groups
            .entry(label)
            .or_default()
            .push((x_of(r), r.avg_total_power));
    }
    let series: Vec<Series> = groups
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect();
    render(
        PlotKind::Line,
        "Average total transmit power",
        axis,
        "average total power (linear)",
        &series,
        true,
    )
}

/// Noiseless received samples against the scaled lattice markers.
pub fn constellation_chart(
    lattice: &[Complex64],
    received: &[Complex64],
    title: &str,
) -> Result<String> {
    let series = [
        Series {
            label: "scaled lattice".into(),
            points: lattice.iter().map(|p| (p.re, p.im)).collect(),
        },
        Series {
            label: "induced samples".into(),
            points: received.iter().map(|p| (p.re, p.im)).collect(),
        },
    ];
    render(PlotKind::Scatter, title, "Re", "Im", &series, false)
}
