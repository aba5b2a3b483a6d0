//! Minimal SVG line charts for per-round metric traces, one polyline per
//! method.

use std::fmt::Write as _;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// Render one series per (label, per-round values) pair.
pub fn line_chart(title: &str, series: &[(String, Vec<f64>)]) -> String {
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    let mut max_len = 0usize;
    for (_, ys) in series {
        max_len = max_len.max(ys.len());
        for &y in ys {
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }
    if !min_y.is_finite() {
        min_y = 0.0;
        max_y = 1.0;
    }
    if (max_y - min_y).abs() < 1e-12 {
        max_y = min_y + 1.0;
    }
    let x_of = |i: usize| {
        MARGIN + (W - 2.0 * MARGIN) * i as f64 / (max_len.max(2) - 1) as f64
    };
    let y_of = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * (v - min_y) / (max_y - min_y);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16">{title}</text>"#,
        MARGIN
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        b = H - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="8" y="{}" font-family="sans-serif" font-size="11">{max_y:.3}</text><text x="8" y="{}" font-family="sans-serif" font-size="11">{min_y:.3}</text>"#,
        MARGIN + 4.0,
        H - MARGIN
    );
    for (k, (label, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| format!("{:.2},{:.2}", x_of(i), y_of(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{label}</text>"#,
            W - MARGIN + 4.0,
            MARGIN + 16.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
