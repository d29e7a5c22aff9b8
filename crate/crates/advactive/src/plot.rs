//! Deterministic SVG rendering of error curves.
//!
//! The renderer is a pure function of its input: fixed canvas, fixed
//! palette, fixed-precision coordinates. Rendering the same curves twice
//! yields byte-identical SVG, which makes plots diffable and lets tests
//! assert reproducibility at the file level.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PLOT_WIDTH: f64 = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
const PLOT_HEIGHT: f64 = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

/// Stroke colors cycled across series.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// One labeled series: test error indexed by query number.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub values: Vec<f64>,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        PlotSeries {
            label: label.into(),
            values,
        }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Smallest step from a fixed ladder that keeps the axis at eleven ticks
/// or fewer; the ladder top serves as a catch-all for huge ranges.
fn x_tick_step(x_max: usize) -> usize {
    const LADDER: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];
    for step in LADDER {
        if x_max / step + 1 <= 11 {
            return step;
        }
    }
    x_max.div_ceil(10)
}

/// Renders labeled error curves into an SVG document.
///
/// The y-axis spans from zero to the data maximum rounded up to the next
/// 0.05 (at least 0.05); the x-axis covers the longest series.
pub fn render_plot(series: &[PlotSeries]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Validation("no series to plot".into()));
    }
    let mut max_value: f64 = 0.0;
    let mut max_len = 0usize;
    for s in series {
        if s.values.is_empty() {
            return Err(Error::Validation(format!("series '{}' is empty", s.label)));
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "series '{}' contains a non-finite value",
                s.label
            )));
        }
        max_value = max_value.max(s.values.iter().cloned().fold(0.0, f64::max));
        max_len = max_len.max(s.values.len());
    }
    let y_max = ((max_value * 20.0).ceil() / 20.0).max(0.05);
    let x_max = (max_len - 1).max(1);

    let px = |q: usize| MARGIN_LEFT + q as f64 / x_max as f64 * PLOT_WIDTH;
    let py = |v: f64| MARGIN_TOP + (1.0 - v / y_max) * PLOT_HEIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );

    // Horizontal gridlines and y tick labels.
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_LEFT + PLOT_WIDTH
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="12">{v:.3}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }

    // X ticks.
    let step = x_tick_step(x_max);
    let mut q = 0;
    while q <= x_max {
        let x = px(q);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000" stroke-width="1"/>"##,
            MARGIN_TOP + PLOT_HEIGHT,
            MARGIN_TOP + PLOT_HEIGHT + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="12">{q}</text>"#,
            MARGIN_TOP + PLOT_HEIGHT + 20.0
        );
        q += step;
    }

    // Axes.
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN_LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000000" stroke-width="1.5"/>"##,
        MARGIN_TOP + PLOT_HEIGHT,
        MARGIN_LEFT + PLOT_WIDTH,
        MARGIN_TOP + PLOT_HEIGHT
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{:.2}" stroke="#000000" stroke-width="1.5"/>"##,
        MARGIN_TOP + PLOT_HEIGHT
    );

    // Axis titles.
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">queries</text>"#,
        MARGIN_LEFT + PLOT_WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {:.2})">mean test error</text>"#,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        MARGIN_TOP + PLOT_HEIGHT / 2.0
    );

    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points = s
            .values
            .iter()
            .enumerate()
            .map(|(q, v)| format!("{:.2},{:.2}", px(q), py(*v)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
    }

    // Legend.
    let legend_x = MARGIN_LEFT + PLOT_WIDTH + 14.0;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 20.0 + 22.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{legend_x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2.5"/>"#,
            legend_x + 26.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            legend_x + 32.0,
            y + 4.0,
            xml_escape(&s.label)
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the plot to `path`.
pub fn write_plot(series: &[PlotSeries], path: &Path) -> Result<()> {
    let svg = render_plot(series)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
