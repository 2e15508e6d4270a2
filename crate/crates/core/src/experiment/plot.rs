//! Self-contained SVG charts of a report CSV.

use super::csv::parse_csv;
use crate::error::Result;
use crate::metrics::MetricsReport;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 420.0;
pub const MARGIN_LEFT: f64 = 70.0;
pub const MARGIN_RIGHT: f64 = 20.0;
pub const MARGIN_TOP: f64 = 30.0;
pub const MARGIN_BOTTOM: f64 = 50.0;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Linear data-to-pixel mapping. A degenerate range maps to the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Axes {
    fn from_points(pts: impl Iterator<Item = (f64, f64)>) -> Option<Self> {
        let mut a = Axes {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            a.x_min = a.x_min.min(x);
            a.x_max = a.x_max.max(x);
            a.y_min = a.y_min.min(y);
            a.y_max = a.y_max.max(y);
        }
        a.x_min.is_finite().then_some(a)
    }

    pub fn px(&self, x: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        if self.x_max > self.x_min {
            MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * w
        } else {
            MARGIN_LEFT + w / 2.0
        }
    }

    pub fn py(&self, y: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        if self.y_max > self.y_min {
            HEIGHT - MARGIN_BOTTOM - (y - self.y_min) / (self.y_max - self.y_min) * h
        } else {
            MARGIN_TOP + h / 2.0
        }
    }
}

/// One named series: scatter points and a line through per-x means.
struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    means: Vec<(f64, f64)>,
}

fn group(rows: &[MetricsReport], value: impl Fn(&MetricsReport) -> f64) -> Vec<Series> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.tracker.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .map(|name| {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.tracker == name)
                .map(|r| (r.sr, value(r)))
                .filter(|(_, y)| y.is_finite())
                .collect();
            let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let means = xs
                .into_iter()
                .map(|x| {
                    let v: Vec<f64> = points.iter().filter(|p| p.0 == x).map(|p| p.1).collect();
                    (x, v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            Series {
                name: name.to_string(),
                points,
                means,
            }
        })
        .collect()
}

fn chart(title: &str, y_label: &str, series: &[Series], scatter: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
        WIDTH / 2.0
    );
    let (l, r, t, b) = (
        MARGIN_LEFT,
        WIDTH - MARGIN_RIGHT,
        MARGIN_TOP,
        HEIGHT - MARGIN_BOTTOM,
    );
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">scrambling rate (rad/s)</text>"#,
        (l + r) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0
    );
    let axes = Axes::from_points(series.iter().flat_map(|x| x.points.iter().copied()));
    let Some(ax) = axes else {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#,
            (l + r) / 2.0,
            (t + b) / 2.0
        );
        s.push_str("</svg>\n");
        return s;
    };
    for (v, anchor, x, y) in [
        (ax.x_min, "start", l, b + 16.0),
        (ax.x_max, "end", r, b + 16.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4e}</text>"#
        );
    }
    for (v, y) in [(ax.y_min, b), (ax.y_max, t + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end">{v:.4e}</text>"#,
            l - 4.0
        );
    }
    for (i, se) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        if scatter {
            for &(x, y) in &se.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{c}" fill-opacity="0.5"/>"#,
                    ax.px(x),
                    ax.py(y)
                );
            }
        }
        let pts: Vec<String> = se
            .means
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-series="{}" points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            se.name,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{}</text>"#,
            l + 8.0,
            t + 16.0 + 14.0 * i as f64,
            se.name
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Renders the three charts for a set of rows: excess noise, key rate and
/// tracking error against scrambling rate.
pub fn render(rows: &[MetricsReport]) -> [(&'static str, String); 3] {
    let ok: Vec<MetricsReport> = rows.iter().filter(|r| !r.diverged).cloned().collect();
    [
        (
            "xi_vs_sr.svg",
            chart("Excess noise", "xi (SNU)", &group(&ok, |r| r.xi_hat), true),
        ),
        (
            "skr_vs_sr.svg",
            chart(
                "Secret key rate",
                "SKR (bit/s)",
                &group(rows, |r| r.skr_bps),
                true,
            ),
        ),
        (
            "alpha_err_vs_sr.svg",
            chart(
                "Splitting-angle tracking error",
                "RMS error (rad)",
                &group(&ok, |r| r.alpha_rms_err),
                true,
            ),
        ),
    ]
}

/// Reads a report CSV and writes the charts next to it.
pub fn emit_plots(csv: &Path) -> Result<Vec<PathBuf>> {
    let rows = parse_csv(&std::fs::read_to_string(csv)?)?;
    let dir = csv.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (name, svg) in render(&rows) {
        let p = dir.join(name);
        std::fs::write(&p, svg)?;
        out.push(p);
    }
    Ok(out)
}
