//! Standalone SVG rendering of two-dimensional biplots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pca::Biplot;

pub const CANVAS: f64 = 800.0;
const ORIGIN: f64 = CANVAS / 2.0;
const REACH: f64 = 0.42 * CANVAS;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Pixels per data unit so the longest vector reaches `REACH`.
fn fit_scale<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> f64 {
    let max = vectors
        .flat_map(|v| v.iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max);
    if max > 0.0 {
        REACH / max
    } else {
        1.0
    }
}

/// Renders a `k = 2` biplot. Arrows and points use separate scales, declared
/// on the root element as `data-arrow-scale` and `data-point-scale` (pixels
/// per unit); the origin sits at the canvas center and `y` grows upward.
pub fn render_biplot_svg(biplot: &Biplot) -> Result<String> {
    if biplot.explained.len() != 2 {
        return Err(Error::dim(2, biplot.explained.len()));
    }
    let arrow_scale = fit_scale(biplot.arrows.iter().map(|a| a.coords.as_slice()));
    let point_scale = fit_scale(biplot.points.iter().map(|p| p.coords.as_slice()));
    let px = |v: f64, s: f64| ORIGIN + v * s;
    let py = |v: f64, s: f64| ORIGIN - v * s;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}" data-origin-x="{o}" data-origin-y="{o}" data-arrow-scale="{arrow_scale:.6}" data-point-scale="{point_scale:.6}">"#,
        c = CANVAS,
        o = ORIGIN,
    );
    out.push_str(
        "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#b2182b\"/></marker></defs>\n",
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(out, r##"<g id="axes" stroke="#999" stroke-width="1">"##);
    let _ = writeln!(out, r#"<line x1="0" y1="{ORIGIN}" x2="{CANVAS}" y2="{ORIGIN}"/>"#);
    let _ = writeln!(out, r#"<line x1="{ORIGIN}" y1="0" x2="{ORIGIN}" y2="{CANVAS}"/>"#);
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<text id="xlabel" x="{}" y="{}" text-anchor="end" font-size="14">PC1 ({:.1}%)</text>"#,
        CANVAS - 8.0,
        ORIGIN - 8.0,
        100.0 * biplot.explained[0]
    );
    let _ = writeln!(
        out,
        r#"<text id="ylabel" x="{}" y="18" font-size="14">PC2 ({:.1}%)</text>"#,
        ORIGIN + 8.0,
        100.0 * biplot.explained[1]
    );

    out.push_str("<g id=\"points\" fill=\"#2166ac\" font-size=\"10\">\n");
    for p in &biplot.points {
        let (x, y) = (px(p.coords[0], point_scale), py(p.coords[1], point_scale));
        let label = escape(&p.label);
        let _ = writeln!(
            out,
            r#"<circle class="point" data-label="{label}" cx="{x:.3}" cy="{y:.3}" r="3"/><text x="{:.3}" y="{:.3}">{label}</text>"#,
            x + 4.0,
            y - 4.0
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g id=\"arrows\" stroke=\"#b2182b\" stroke-width=\"1.5\" font-size=\"11\">\n");
    for a in &biplot.arrows {
        let (x, y) = (px(a.coords[0], arrow_scale), py(a.coords[1], arrow_scale));
        let label = escape(&a.label);
        let _ = writeln!(
            out,
            r##"<line class="arrow" data-label="{label}" x1="{ORIGIN}" y1="{ORIGIN}" x2="{x:.3}" y2="{y:.3}" marker-end="url(#head)"/><text x="{:.3}" y="{:.3}" stroke="none" fill="#b2182b">{label}</text>"##,
            x + 3.0,
            y - 3.0
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn emit_biplot_svg(biplot: &Biplot, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_biplot_svg(biplot)?;
    write_atomic(path, svg.as_bytes())
}
