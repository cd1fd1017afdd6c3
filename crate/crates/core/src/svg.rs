//! SVG rendering of a CRC curve.
//!
//! Horizontal axis is the confidence level `1 - delta`, vertical axis the
//! fraction of examples (errors) or labels (width). The reference diagonal
//! runs from the upper left to the bottom right.

use std::fmt::Write;

use crate::crc::CrcCurve;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn x_px(confidence: f64) -> f64 {
    MARGIN + confidence * SIZE
}

fn y_px(fraction: f64) -> f64 {
    MARGIN + (1.0 - fraction) * SIZE
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
    let coords: Vec<String> = points
        .map(|(c, v)| format!("{:.3},{:.3}", x_px(c), y_px(v)))
        .collect();
    let _ = writeln!(out, r#"  <polyline points="{}" {style}/>"#, coords.join(" "));
}

pub fn render_crc_svg(curve: &CrcCurve) -> String {
    let total = SIZE + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(out, r#"  <rect width="{total}" height="{total}" fill="white"/>"#);

    // axes
    let (x0, x1, y0, y1) = (x_px(0.0), x_px(1.0), y_px(0.0), y_px(1.0));
    let _ = writeln!(out, r#"  <line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"  <line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"  <text x="{:.3}" y="{:.3}" font-size="11" text-anchor="middle">{t}</text>"#,
            x_px(t),
            y0 + 16.0
        );
        let _ = writeln!(
            out,
            r#"  <text x="{:.3}" y="{:.3}" font-size="11" text-anchor="end">{t}</text>"#,
            x0 - 6.0,
            y_px(t) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"  <text x="{:.3}" y="{:.3}" font-size="12" text-anchor="middle">confidence level</text>"#,
        x_px(0.5),
        y0 + 36.0
    );

    polyline(
        &mut out,
        [(0.0, 1.0), (1.0, 0.0)].into_iter(),
        r##"fill="none" stroke="#888888" stroke-width="1""##,
    );
    let deltas = curve.grid_deltas();
    polyline(
        &mut out,
        deltas.iter().zip(curve.err_at()).map(|(&d, &e)| (1.0 - d, e)),
        r##"fill="none" stroke="#c0392b" stroke-width="2" stroke-dasharray="6,4""##,
    );
    polyline(
        &mut out,
        deltas.iter().zip(curve.unc_at()).map(|(&d, &u)| (1.0 - d, u)),
        r##"fill="none" stroke="#1f4e79" stroke-width="2""##,
    );
    out.push_str("</svg>\n");
    out
}
