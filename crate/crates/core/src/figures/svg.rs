//! Minimal self-contained SVG charts on a fixed 800×600 canvas.
//!
//! Output depends only on the input data: coordinates are printed with a
//! fixed number of decimals and nothing else (time, randomness) is read.
//! Every plotted series is one `<g class="series">` element.

use std::fmt::Write;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Heatmap color ramp endpoints (low, high).
const RAMP: [(u8, u8, u8); 2] = [(247, 251, 255), (8, 48, 107)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Line,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub kind: SeriesKind,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            kind: SeriesKind::Line,
            points,
        }
    }

    pub fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            kind: SeriesKind::Markers,
            points,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Labels {
    pub title: String,
    pub x: String,
    pub y: String,
}

/// Cells `(x, y, value)` on a square lattice with spacing `cell`.
#[derive(Debug, Clone)]
pub struct HeatmapData {
    pub cells: Vec<(f64, f64, f64)>,
    pub cell: f64,
}

pub enum Chart<'a> {
    Line(&'a [Series]),
    Heatmap(&'a HeatmapData, &'a [Series]),
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
    let (lo, hi) = (RAMP[0], RAMP[1]);
    format!("#{:02x}{:02x}{:02x}", mix(lo.0, hi.0), mix(lo.1, hi.1), mix(lo.2, hi.2))
}

fn write_axes(s: &mut String, f: &Frame, labels: &Labels) {
    let (left, right) = (LEFT, WIDTH - RIGHT);
    let (top, bottom) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        right - left,
        bottom - top
    );
    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let xv = f.x0 + frac * (f.x1 - f.x0);
        let yv = f.y0 + frac * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"##,
            bottom + 5.0,
            bottom + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        escape(&labels.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 15.0,
        escape(&labels.x)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(&labels.y)
    );
}

fn write_series(s: &mut String, f: &Frame, series: &[Series]) {
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" data-label="{}">"#, escape(&ser.label));
        match ser.kind {
            SeriesKind::Line => {
                let pts: Vec<String> = ser
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            SeriesKind::Markers => {
                for &(x, y) in &ser.points {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{color}"/>"#,
                        f.px(x),
                        f.py(y)
                    );
                }
            }
        }
        let ly = TOP + 20.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{ly:.2}" font-size="12">{}</text>"#,
            ly - 10.0,
            lx + 18.0,
            escape(&ser.label)
        );
        s.push_str("</g>\n");
    }
}

/// Renders a chart to an SVG document.
pub fn render(chart: &Chart, labels: &Labels) -> Result<String> {
    let (series, heat) = match chart {
        Chart::Line(series) => (*series, None),
        Chart::Heatmap(h, overlays) => (*overlays, Some(*h)),
    };
    if heat.is_none() && (series.is_empty() || series.iter().all(|s| s.points.is_empty())) {
        return Err(Error::domain("nothing to plot: every series is empty"));
    }
    if heat.is_some_and(|h| h.cells.is_empty()) {
        return Err(Error::domain("nothing to plot: heatmap has no cells"));
    }
    let points = series.iter().flat_map(|s| s.points.iter().copied());
    let heat_points = heat.into_iter().flat_map(|h| {
        let half = h.cell / 2.0;
        h.cells
            .iter()
            .flat_map(move |&(x, y, _)| [(x - half, y - half), (x + half, y + half)])
    });
    let all: Vec<(f64, f64)> = points.chain(heat_points).collect();
    if all.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::domain("series contain non-finite coordinates"));
    }
    let (xa, xb) = extent(all.iter().map(|p| p.0));
    let (ya, yb) = extent(all.iter().map(|p| p.1));
    let ((x0, x1), (y0, y1)) = if heat.is_some() {
        ((xa, xb), (ya, yb))
    } else {
        (padded(xa, xb), padded(ya, yb))
    };
    let frame = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if let Some(h) = heat {
        let (vlo, vhi) = extent(h.cells.iter().map(|c| c.2));
        let span = if vhi > vlo { vhi - vlo } else { 1.0 };
        let w = frame.px(h.cell) - frame.px(0.0);
        let hgt = frame.py(0.0) - frame.py(h.cell);
        s.push_str("<g class=\"heatmap\">\n");
        for &(x, y, v) in &h.cells {
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                frame.px(x - h.cell / 2.0),
                frame.py(y + h.cell / 2.0),
                w + 0.05,
                hgt + 0.05,
                ramp((v - vlo) / span)
            );
        }
        let lx = WIDTH - RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{:.2}" font-size="12">low {}</text><text x="{lx}" y="{:.2}" font-size="12">high {}</text>"#,
            HEIGHT - BOTTOM - 30.0,
            tick_label(vlo),
            HEIGHT - BOTTOM - 10.0,
            tick_label(vhi)
        );
        s.push_str("</g>\n");
    }
    write_axes(&mut s, &frame, labels);
    write_series(&mut s, &frame, series);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Number of plotted series in a rendered document.
pub fn count_series(svg: &str) -> usize {
    svg.matches(r#"<g class="series""#).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Labels {
        Labels {
            title: "t <1>".into(),
            x: "x".into(),
            y: "y".into(),
        }
    }

    #[test]
    fn deterministic() {
        let s = [Series::line("a", vec![(0.0, 1.0), (1.0, 2.0)]), Series::markers("b", vec![(0.5, 1.5)])];
        let a = render(&Chart::Line(&s), &labels()).unwrap();
        let b = render(&Chart::Line(&s), &labels()).unwrap();
        assert_eq!(a, b);
        assert_eq!(count_series(&a), 2);
        assert!(a.contains(r#"width="800" height="600""#));
        assert!(a.contains("t &lt;1&gt;"));
    }

    #[test]
    fn flat_series_is_horizontal() {
        let s = [Series::line("flat", vec![(0.0, 2.0), (0.5, 2.0), (1.0, 2.0)])];
        let svg = render(&Chart::Line(&s), &labels()).unwrap();
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.iter().all(|y| *y == ys[0]));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render(&Chart::Line(&[]), &labels()).is_err());
        assert!(render(&Chart::Line(&[Series::line("e", vec![])]), &labels()).is_err());
        let h = HeatmapData { cells: vec![], cell: 0.1 };
        assert!(render(&Chart::Heatmap(&h, &[]), &labels()).is_err());
    }

    #[test]
    fn heatmap_ramp() {
        assert_eq!(ramp(0.0), "#f7fbff");
        assert_eq!(ramp(1.0), "#08306b");
        let h = HeatmapData {
            cells: vec![(0.0, 0.0, 1.0), (0.5, 0.0, 2.0), (0.0, 0.5, 3.0)],
            cell: 0.5,
        };
        let svg = render(&Chart::Heatmap(&h, &[]), &labels()).unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 3 + 1);
        assert_eq!(count_series(&svg), 0);
    }
}
