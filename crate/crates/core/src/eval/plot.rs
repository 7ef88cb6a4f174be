//! Standalone SVG line plots.

use std::fmt::Write as _;

/// Vertical line at a sample index.
pub struct Marker<'a> {
    pub index: usize,
    pub label: &'a str,
    pub color: &'a str,
}

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline of `series` against its index with optional vertical markers.
pub fn line_plot_svg(series: &[f64], title: &str, y_label: &str, markers: &[Marker<'_>]) -> String {
    let finite = series.iter().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let n = series.len().max(2) - 1;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / n as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#, PAD - 4.0, PAD + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo:.3}</text>"#, PAD - 4.0, H - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">frame (0 to {})</text>"#, W / 2.0, H - 12.0, series.len().saturating_sub(1));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(y_label)
    );
    if !series.is_empty() {
        let pts: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(if v.is_finite() { v } else { lo })))
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f4e9c" stroke-width="1.2"/>"##, pts.join(" "));
    }
    for (k, m) in markers.iter().enumerate() {
        let mx = x(m.index.min(n));
        let _ = writeln!(
            s,
            r#"<line x1="{mx:.2}" y1="{PAD}" x2="{mx:.2}" y2="{}" stroke="{}" stroke-dasharray="4 3"/>"#,
            H - PAD,
            m.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" fill="{}">{}</text>"#,
            mx + 4.0,
            PAD + 14.0 * (k as f64 + 1.0),
            m.color,
            esc(m.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
