//! Plain SVG line charts. Output depends only on the input, so charts can
//! be diffed and checked into fixtures.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::MetricSeries;
use crate::catalog::Period;
use crate::error::{Error, Result};
use crate::raster::write_atomic;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;
const TICKS: usize = 5;
const COLORS: [&str; 2] = ["#c0392b", "#2471a3"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.08;
        (lo - pad, hi + pad)
    }
}

/// One series, or two. Two series of different metrics get separate left
/// and right axes; two of the same metric share the left axis.
pub fn render_chart(series: &[&MetricSeries], title: &str) -> Result<String> {
    if series.is_empty() || series.len() > 2 {
        return Err(Error::InvalidInput(format!(
            "chart takes one or two series, got {}",
            series.len()
        )));
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidInput("chart has no data points".into()));
    }
    if series.iter().flat_map(|s| s.points.iter()).any(|p| !p.1.is_finite()) {
        return Err(Error::InvalidInput("chart values must be finite".into()));
    }
    let dual = series.len() == 2 && series[0].metric != series[1].metric;

    let periods: Vec<Period> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |p: Period| {
        let i = periods.iter().position(|q| *q == p).unwrap_or(0);
        if periods.len() == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (periods.len() - 1) as f64
        }
    };

    let ranges: Vec<(f64, f64)> = if dual {
        series.iter().map(|s| value_range(s.points.iter().map(|p| p.1))).collect()
    } else {
        let r = value_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        vec![r; series.len()]
    };
    let y_of = |axis: usize, v: f64| {
        let (lo, hi) = ranges[axis];
        TOP + plot_h * (1.0 - (v - lo) / (hi - lo))
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );

    // x labels
    for p in &periods {
        let x = x_of(*p);
        let y = TOP + plot_h + 12.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="end" transform="rotate(-45 {x:.2} {y:.2})">{}</text>"#,
            p.label()
        );
    }

    // y axes
    let axes: Vec<usize> = if dual { vec![0, 1] } else { vec![0] };
    for &axis in &axes {
        let (lo, hi) = ranges[axis];
        let metric = series[axis].metric;
        let (x, anchor, dx) = if axis == 0 { (LEFT, "end", -6.0) } else { (LEFT + plot_w, "start", 6.0) };
        for t in 0..=TICKS {
            let v = lo + (hi - lo) * t as f64 / TICKS as f64;
            let y = y_of(axis, v);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#444"/>"##,
                x + dx / 2.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{:.*}</text>"#,
                x + dx,
                y + 4.0,
                if metric.decimals() > 1 { 3 } else { 1 },
                v
            );
        }
        let lx = if axis == 0 { 18.0 } else { WIDTH - 18.0 };
        let ly = TOP + plot_h / 2.0;
        let label = if dual || series.len() == 1 {
            format!("{} ({})", metric.label(), series[axis].cell)
        } else {
            metric.label().to_string()
        };
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" fill="{}" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            if dual { COLORS[axis] } else { "#000" },
            escape(&label)
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i];
        let axis = if dual { i } else { 0 };
        let mut pts: Vec<(Period, f64)> = s.points.clone();
        pts.sort_by_key(|p| p.0);
        // a missing period between two points breaks the line
        let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut prev_idx: Option<usize> = None;
        for &(p, v) in &pts {
            let idx = periods.iter().position(|q| *q == p).unwrap_or(0);
            let xy = (x_of(p), y_of(axis, v));
            match (prev_idx, runs.last_mut()) {
                (Some(j), Some(run)) if idx == j + 1 => run.push(xy),
                _ => runs.push(vec![xy]),
            }
            prev_idx = Some(idx);
        }
        let _ = writeln!(
            svg,
            r#"<g class="series" data-cell="{}" data-metric="{}" stroke="{color}" fill="{color}">"#,
            escape(&s.cell),
            s.metric.name()
        );
        for run in runs.iter().filter(|r| r.len() > 1) {
            let coords: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke-width="2" points="{}"/>"#,
                coords.join(" ")
            );
        }
        for &(p, v) in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" data-period="{}" data-value="{}"/>"#,
                x_of(p),
                y_of(axis, v),
                p.label(),
                s.metric.format(v)
            );
        }
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{} {}</text>"#,
            LEFT + 10.0 + 160.0 * i as f64,
            TOP + 16.0,
            escape(&s.cell),
            s.metric.label()
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_chart(series: &[&MetricSeries], title: &str, path: &Path) -> Result<()> {
    write_atomic(path, render_chart(series, title)?.as_bytes())
}
