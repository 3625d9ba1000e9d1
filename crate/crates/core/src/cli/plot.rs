//! Minimal SVG scatter plots colored by class.

use std::fmt::Write as _;

use crate::data::{Dataset, UNLABELED};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const SIZE: f64 = 480.0;
const MARGIN: f64 = 36.0;

/// One panel per dataset, side by side, sharing axis limits.
pub fn scatter_svg(panels: &[(&str, &Dataset)]) -> String {
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (_, ds) in panels {
        for r in 0..ds.len() {
            let p = ds.x.row_slice(r);
            let (x, y) = (p[0], p.get(1).copied().unwrap_or(0.0));
            if x.is_finite() && y.is_finite() {
                lo_x = lo_x.min(x);
                hi_x = hi_x.max(x);
                lo_y = lo_y.min(y);
                hi_y = hi_y.max(y);
            }
        }
    }
    if !lo_x.is_finite() {
        (lo_x, hi_x, lo_y, hi_y) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = 0.05 * (hi_x - lo_x).max(hi_y - lo_y).max(1e-9);
    let (lo_x, hi_x, lo_y, hi_y) = (lo_x - pad, hi_x + pad, lo_y - pad, hi_y + pad);
    let span = (hi_x - lo_x).max(hi_y - lo_y);
    let inner = SIZE - 2.0 * MARGIN;

    let width = SIZE * panels.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{SIZE}" viewBox="0 0 {width} {SIZE}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, (title, ds)) in panels.iter().enumerate() {
        let ox = i as f64 * SIZE;
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#999"/>"##,
            ox + MARGIN
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ox + SIZE / 2.0,
            MARGIN - 12.0,
            escape(title)
        );
        for r in 0..ds.len() {
            let p = ds.x.row_slice(r);
            let (x, y) = (p[0], p.get(1).copied().unwrap_or(0.0));
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let px = ox + MARGIN + (x - lo_x) / span * inner;
            let py = MARGIN + inner - (y - lo_y) / span * inner;
            let color = match ds.labels[r] {
                UNLABELED => "#777777",
                c => PALETTE[c as usize % PALETTE.len()],
            };
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="1.6" fill="{color}" fill-opacity="0.6"/>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
