//! Deterministic file emission: CSV tables with 17 significant digits,
//! JSON reports with stable key order, and SVG line plots.

use std::path::Path;

use serde::Serialize;

/// One pass/fail line of a report; `name` matches the invariant it checks.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// "max": measured must stay below bound; "min": above.
    pub comparison: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn upper(name: &str, measured: f64, bound: f64) -> Check {
        Check {
            name: name.to_string(),
            measured,
            bound,
            comparison: "max",
            pass: measured < bound,
        }
    }

    pub fn lower(name: &str, measured: f64, bound: f64) -> Check {
        Check {
            name: name.to_string(),
            measured,
            bound,
            comparison: "min",
            pass: measured > bound,
        }
    }

    pub fn exact_zero(name: &str, measured: f64) -> Check {
        Check {
            name: name.to_string(),
            measured,
            bound: 0.0,
            comparison: "max",
            pass: measured == 0.0,
        }
    }
}

/// Machine-readable run summary.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl Report {
    pub fn new(experiment: &'static str, checks: Vec<Check>) -> Report {
        let pass = checks.iter().all(|c| c.pass);
        Report {
            experiment,
            pass,
            checks,
            details: None,
        }
    }

    pub fn with_details(mut self, details: serde_json::Value) -> Report {
        self.details = Some(details);
        self
    }
}

/// 17 significant digits, locale-independent.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()
}

pub fn write_report(path: &Path, report: &Report) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json + "\n")
}

/// Minimal multi-line SVG plot: one polyline per labelled series.
pub fn write_line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> std::io::Result<()> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() || x_max == x_min {
        x_min = 0.0;
        x_max = 1.0;
    }
    if !y_min.is_finite() || y_max == y_min {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let sx = |x: f64| ML + (x - x_min) / (x_max - x_min) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y_min) / (y_max - y_min) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        W / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{x_label}</text>\n",
        W / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {:.1})\">{y_label}</text>\n",
        H / 2.0,
        H / 2.0
    ));
    for (tick, value) in [(x_min, x_min), (x_max, x_max)] {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{value:.3}</text>\n",
            sx(tick),
            H - MB + 16.0
        ));
    }
    for value in [y_min, y_max] {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{value:.3}</text>\n",
            ML - 6.0,
            sy(value) + 4.0
        ));
    }
    for (idx, (label, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[idx % COLORS.len()];
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            d.push_str(if i == 0 { "M" } else { "L" });
            d.push_str(&format!("{:.2},{:.2} ", sx(x), sy(y)));
        }
        svg.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{label}</text>\n",
            W - MR - 150.0,
            MT + 18.0 + 16.0 * idx as f64
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}
