//! Minimal SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;

const W: f64 = 720.0;
const H: f64 = 440.0;
const M: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MAX_POINTS: usize = 4000;

fn bounds<'a>(series: impl Iterator<Item = &'a (f64, f64)>) -> Option<(f64, f64, f64, f64)> {
    series.filter(|(x, y)| x.is_finite() && y.is_finite()).fold(None, |acc, &(x, y)| {
        Some(match acc {
            None => (x, x, y, y),
            Some((a, b, c, d)) => (a.min(x), b.max(x), c.min(y), d.max(y)),
        })
    })
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Render named `(x, y)` series as an SVG document.
pub fn render_svg(title: &str, x_label: &str, series: &[(&str, &[(f64, f64)])]) -> String {
    let (x0, x1, y0, y1) = bounds(series.iter().flat_map(|(_, p)| p.iter())).unwrap_or((0.0, 1.0, 0.0, 1.0));
    let (x0, x1) = widen(x0, x1);
    let (y0, y1) = widen(y0, y1);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, esc(x_label));
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="{anchor}">{x:.4}</text>"#, px(x), H - M + 16.0);
    }
    for y in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y:.4}</text>"#, M - 4.0, py(y) + 4.0);
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let step = pts.len().div_ceil(MAX_POINTS).max(1);
        let path: Vec<String> = pts
            .iter()
            .step_by(step)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = M + 16.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - M - 8.0 - 110.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_svg(path: &Path, title: &str, x_label: &str, series: &[(&str, &[(f64, f64)])]) -> anyhow::Result<()> {
    std::fs::write(path, render_svg(title, x_label, series)).with_context(|| format!("cannot write {}", path.display()))
}
