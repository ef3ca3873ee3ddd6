//! Minimal SVG line/area charts for the indicator figures.

use std::fmt::Write;

use chrono::NaiveDate;
use paci_core::aggregator::StateScale;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const X_TICKS: usize = 6;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: &str, color: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            color: color.to_string(),
            values,
        }
    }
}

/// Shaded region between two curves.
#[derive(Debug, Clone)]
pub struct Band {
    pub name: String,
    pub color: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub y_label: String,
    pub dates: Vec<NaiveDate>,
    pub lines: Vec<Series>,
    pub bands: Vec<Band>,
    /// Draw `lines` as stacked areas instead of polylines.
    pub stacked: bool,
    /// Background colouring by state.
    pub states: Option<StateScale>,
}

struct Frame {
    n: usize,
    y_max: f64,
}

impl Frame {
    fn x(&self, i: usize) -> f64 {
        let w = WIDTH - LEFT - RIGHT;
        if self.n <= 1 {
            LEFT + w / 2.0
        } else {
            LEFT + w * i as f64 / (self.n - 1) as f64
        }
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        TOP + h * (1.0 - (v / self.y_max).clamp(0.0, 1.0))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn points(frame: &Frame, values: impl Iterator<Item = (usize, f64)>) -> String {
    values
        .map(|(i, v)| format!("{:.2},{:.2}", frame.x(i), frame.y(v)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn polygon(frame: &Frame, lower: &[f64], upper: &[f64]) -> String {
    let top = points(frame, upper.iter().copied().enumerate());
    let bottom = points(frame, lower.iter().copied().enumerate().rev());
    format!("{top} {bottom}")
}

fn nice_max(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let step = 10f64.powf(v.log10().floor());
    (v / step).ceil() * step
}

pub fn render(chart: &Chart) -> String {
    let n = chart.dates.len();
    let stacked_totals: Vec<f64> = (0..n)
        .map(|i| {
            chart
                .lines
                .iter()
                .map(|s| s.values.get(i).copied().unwrap_or(0.0))
                .sum()
        })
        .collect();
    let data_max = chart
        .lines
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .chain(chart.bands.iter().flat_map(|b| b.upper.iter().copied()))
        .chain(if chart.stacked {
            stacked_totals.clone()
        } else {
            Vec::new()
        })
        .fold(0.0, f64::max);
    let scale_max = chart
        .states
        .as_ref()
        .and_then(|s| s.cutoffs.last().map(|c| c.value))
        .unwrap_or(0.0);
    let frame = Frame {
        n,
        y_max: nice_max(data_max.max(scale_max)),
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&chart.title)
    );

    if let Some(scale) = &chart.states {
        for (k, c) in scale.cutoffs.iter().enumerate() {
            let upper = scale.cutoffs.get(k + 1).map_or(frame.y_max, |n| n.value);
            if c.value >= frame.y_max {
                continue;
            }
            let (y0, y1) = (frame.y(upper), frame.y(c.value));
            let _ = writeln!(
                out,
                r#"<rect x="{LEFT}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.18"><title>{}</title></rect>"#,
                WIDTH - LEFT - RIGHT,
                y1 - y0,
                c.color,
                escape(&c.label)
            );
        }
    }

    // Axes and ticks.
    let (x0, x1, y_bottom) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);
    let _ = writeln!(out, r##"<g stroke="#333" stroke-width="1">"##);
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y_bottom}" x2="{x1}" y2="{y_bottom}"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y_bottom}"/>"#
    );
    let _ = writeln!(out, "</g>");
    for k in 0..=5 {
        let v = frame.y_max * k as f64 / 5.0;
        let y = frame.y(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            v
        );
    }
    if n > 0 {
        let ticks = X_TICKS.min(n);
        for k in 0..ticks {
            let i = if ticks == 1 {
                0
            } else {
                k * (n - 1) / (ticks - 1)
            };
            let x = frame.x(i);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{y_bottom}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                y_bottom + 4.0,
                y_bottom + 18.0,
                chart.dates[i]
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + y_bottom) / 2.0,
        escape(&chart.y_label)
    );

    for b in &chart.bands {
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.35" stroke="none"/>"#,
            polygon(&frame, &b.lower, &b.upper),
            b.color
        );
    }

    if chart.stacked {
        let mut base = vec![0.0; n];
        for s in &chart.lines {
            let top: Vec<f64> = base
                .iter()
                .enumerate()
                .map(|(i, b)| b + s.values.get(i).copied().unwrap_or(0.0))
                .collect();
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="{}" fill-opacity="0.85" stroke="none"/>"#,
                polygon(&frame, &base, &top),
                s.color
            );
            base = top;
        }
    } else {
        for s in &chart.lines {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                points(&frame, s.values.iter().copied().enumerate()),
                s.color
            );
        }
    }

    let legend = chart
        .lines
        .iter()
        .map(|s| (&s.name, &s.color))
        .chain(chart.bands.iter().map(|b| (&b.name, &b.color)));
    for (k, (name, color)) in legend.enumerate() {
        let y = TOP + 18.0 * k as f64;
        let x = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            x + 18.0,
            y + 10.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let d0 = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let chart = Chart {
            title: "a < b".into(),
            y_label: "v".into(),
            dates: (0..3).map(|i| d0 + chrono::Days::new(i)).collect(),
            lines: vec![Series::new("x", "#000000", vec![1.0, 50.0, 120.0])],
            states: Some(StateScale::default()),
            ..Chart::default()
        };
        let svg = render(&chart);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg, render(&chart));
    }

    #[test]
    fn nice_max_rounds_up() {
        assert_eq!(nice_max(163.8), 200.0);
        assert_eq!(nice_max(180.0), 200.0);
        assert_eq!(nice_max(100.0), 100.0);
        assert_eq!(nice_max(0.0), 1.0);
    }
}
