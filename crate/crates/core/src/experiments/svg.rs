//! Minimal deterministic SVG line plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `log10` of a distance on the vertical axis against time.
    LogDistanceVsTime,
    /// Position on the horizontal axis, time on the vertical axis.
    PositionVsTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    /// Data range on the horizontal axis; derived from the data when `None`.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    /// Distances below this are drawn at it (log plots only).
    pub floor: f64,
    pub width: u32,
    pub height: u32,
    pub stroke_width: f64,
    pub palette: Vec<&'static str>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>) -> Self {
        Self {
            kind,
            title: title.into(),
            x_range: None,
            y_range: None,
            floor: 1e-8,
            width: 480,
            height: 360,
            stroke_width: 1.0,
            palette: vec![
                "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
                "#7f7f7f", "#bcbd22", "#17becf",
            ],
        }
    }
}

/// One curve: `(t, value)` samples and whether it ends in a collision stop.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub samples: Vec<(f64, f64)>,
    pub collision: bool,
}

const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 40.0;
const TICKS: usize = 5;

fn to_plot(spec: &PlotSpec, (t, v): (f64, f64)) -> (f64, f64) {
    match spec.kind {
        PlotKind::LogDistanceVsTime => (t, v.max(spec.floor).log10()),
        PlotKind::PositionVsTime => (v, t),
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `series` as a standalone SVG document.
pub fn emit_svg(spec: &PlotSpec, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.samples.is_empty()) {
        return Err(Error::invalid("cannot plot empty series"));
    }
    if series
        .iter()
        .flat_map(|s| &s.samples)
        .any(|&(t, v)| !t.is_finite() || v.is_nan())
    {
        return Err(Error::invalid("series contain non-finite samples"));
    }
    let points: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.samples.iter().map(|&p| to_plot(spec, p)).collect())
        .collect();
    let (x0, x1) = spec
        .x_range
        .unwrap_or_else(|| span(points.iter().flatten().map(|p| p.0)));
    let (y0, y1) = spec
        .y_range
        .unwrap_or_else(|| span(points.iter().flatten().map(|p| p.1)));

    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let out = &mut svg;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="18" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            sx(xv),
            h - MARGIN_BOTTOM + 14.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            sy(yv) + 3.0,
            tick_label(yv)
        );
    }
    let (x_label, y_label) = match spec.kind {
        PlotKind::LogDistanceVsTime => ("t", "log10 distance"),
        PlotKind::PositionVsTime => ("position", "t"),
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{x_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.2})">{y_label}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (i, (s, pts)) in series.iter().zip(&points).enumerate() {
        let colour = spec.palette[i % spec.palette.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="{}" points="{}"/>"#,
            spec.stroke_width,
            coords.join(" ")
        );
        if s.collision {
            let (x, y) = *pts.last().expect("nonempty");
            let _ = writeln!(
                out,
                r#"<circle class="stop" cx="{:.2}" cy="{:.2}" r="3" fill="{colour}" stroke="black"/>"#,
                sx(x),
                sy(y)
            );
        }
    }
    let _ = writeln!(out, "</svg>");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}
