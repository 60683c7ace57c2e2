//! CSV tables and static SVG charts. Output depends only on the data, so reruns are byte-identical.

use std::fmt::Write;

use noiselab::syndrome::WeightProfile;

/// A file emitted under the run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    /// Path relative to the run directory, e.g. `tables/weight_profile.csv`.
    pub path: String,
    pub contents: String,
}

impl Artifact {
    pub fn table(name: &str, contents: String) -> Self {
        Artifact { path: format!("tables/{name}.csv"), contents }
    }

    pub fn figure(name: &str, contents: String) -> Self {
        Artifact { path: format!("figures/{name}.svg"), contents }
    }
}

pub fn cell(v: f64) -> String {
    v.to_string()
}

pub fn opt_cell(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `s,f` with `n + 1` rows.
pub fn weight_profile_csv(wp: &WeightProfile) -> String {
    wp.to_csv()
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, xlabel: &str, ylabel: &str, body: &str, y_max: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 10.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3e}</text>"#, x0 - 4.0, y1 + 4.0, y_max);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">0</text>"#, x0 - 4.0, y0 + 4.0);
    out.push_str(body);
    out.push_str("</svg>\n");
    out
}

fn y_scale(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.filter(|v| v.is_finite()).fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// One bar per `(label, value)`; negative values are drawn at zero height.
pub fn bar_chart(title: &str, xlabel: &str, ylabel: &str, bars: &[(String, f64)]) -> String {
    let y_max = y_scale(bars.iter().map(|b| b.1));
    let plot_w = WIDTH - 1.5 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slot = plot_w / bars.len().max(1) as f64;
    let mut body = String::new();
    for (k, (label, v)) in bars.iter().enumerate() {
        let h = (v.max(0.0) / y_max) * plot_h;
        let x = MARGIN + k as f64 * slot + 0.1 * slot;
        let _ = writeln!(
            body,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="steelblue"><title>{}: {v}</title></rect>"#,
            HEIGHT - MARGIN - h,
            0.8 * slot,
            escape(label)
        );
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
            x + 0.4 * slot,
            HEIGHT - MARGIN + 14.0,
            escape(label)
        );
    }
    frame(title, xlabel, ylabel, &body, y_max)
}

pub fn weight_profile_chart(title: &str, f: &[f64]) -> String {
    let bars: Vec<(String, f64)> = f.iter().enumerate().map(|(s, v)| (s.to_string(), *v)).collect();
    bar_chart(title, "s", "f", &bars)
}

/// Polyline through `points`, x and y both scaled from zero to their maxima.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let y_max = y_scale(points.iter().map(|p| p.1));
    let x_max = y_scale(points.iter().map(|p| p.0));
    let plot_w = WIDTH - 1.5 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let coords: Vec<String> = points
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", MARGIN + x / x_max * plot_w, HEIGHT - MARGIN - y.max(0.0) / y_max * plot_h))
        .collect();
    let mut body = String::new();
    let _ = writeln!(body, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, coords.join(" "));
    for c in &coords {
        let (x, y) = c.split_once(',').unwrap_or(("0", "0"));
        let _ = writeln!(body, r#"<circle cx="{x}" cy="{y}" r="3" fill="steelblue"/>"#);
    }
    let _ = writeln!(
        body,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN / 2.0,
        HEIGHT - MARGIN + 14.0,
        cell(x_max)
    );
    frame(title, xlabel, ylabel, &body, y_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_profile_csv_has_header_and_rows() {
        let wp = WeightProfile::binomial(4, 0.1);
        let text = weight_profile_csv(&wp);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s,f");
        assert_eq!(lines.len(), 1 + 5);
    }

    #[test]
    fn line_chart_has_polyline_and_labels() {
        let svg = line_chart("scaling", "n", "alpha", &[(2.0, 0.1), (3.0, 0.2), (4.0, 0.4)]);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains(">n</text>") && svg.contains(">alpha</text>"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn bar_chart_draws_every_bar() {
        let svg = weight_profile_chart("profile", &[0.5, 0.3, 0.2]);
        assert_eq!(svg.matches("<rect x=").count(), 3);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
