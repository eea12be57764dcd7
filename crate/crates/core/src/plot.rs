//! Minimal deterministic SVG charts: ROC curves, SHAP beeswarm and SHAP
//! dependence scatter. Output depends only on the inputs, so reports are
//! byte-reproducible.

use std::fmt::Write as _;

use crate::evaluation::RocPoint;
use crate::explain::{DependencePoint, FeatureImportance, ShapRow};
use crate::rng::splitmix64;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, width / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (self.width - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (self.height - 2.0 * MARGIN)
    }

    fn draw(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, r, t, b) = (MARGIN, self.width - MARGIN, MARGIN, self.height - MARGIN);
        let _ = writeln!(out, r#"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, r - l, b - t);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, self.px(xv), b + 16.0, tick(xv));
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, self.py(yv) + 4.0, tick(yv));
        }
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, self.height - 18.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(ylabel)
        );
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// ROC curves for several models on shared axes, with the chance diagonal.
pub fn roc_svg(curves: &[(&str, &[RocPoint])]) -> String {
    let mut out = String::new();
    header(&mut out, W, H, "ROC curves");
    let ax = Axes { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, width: W, height: H };
    ax.draw(&mut out, "False positive rate", "True positive rate");
    let _ = writeln!(
        out,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        ax.px(0.0),
        ax.py(0.0),
        ax.px(1.0),
        ax.py(1.0)
    );
    for (i, (name, roc)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = roc.iter().map(|p| format!("{:.2},{:.2}", ax.px(p.fpr), ax.py(p.tpr))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = MARGIN + 20.0 + 18.0 * i as f64;
        let lx = W - MARGIN - 150.0;
        let _ = writeln!(out, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

/// One row per feature (ranked), one dot per sample at its SHAP value, coloured
/// by the feature value's position within its range.
pub fn beeswarm_svg(importance: &[FeatureImportance], feature_names: &[String], rows: &[ShapRow]) -> String {
    let row_h = 32.0;
    let height = 2.0 * MARGIN + row_h * importance.len().max(1) as f64;
    let width = W + 80.0;
    let mut out = String::new();
    header(&mut out, width, height, "SHAP summary");
    let (x0, x1) = range(rows.iter().flat_map(|r| r.shap.iter().copied()));
    let span = width - 2.0 * MARGIN - 80.0;
    let px = |v: f64| MARGIN + 80.0 + (v - x0) / (x1 - x0) * span;
    let _ = writeln!(
        out,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999999"/>"##,
        px(0.0),
        MARGIN,
        px(0.0),
        height - MARGIN
    );
    for (slot, fi) in importance.iter().enumerate() {
        let Some(f) = feature_names.iter().position(|n| *n == fi.feature) else { continue };
        let cy = MARGIN + row_h * (slot as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN + 74.0, cy + 4.0, escape(&fi.feature));
        let (v0, v1) = range(rows.iter().map(|r| r.features[f]));
        for (i, r) in rows.iter().enumerate() {
            // deterministic jitter in [-0.4, 0.4) of a row height
            let h = splitmix64((i as u64) << 8 | f as u64);
            let jitter = ((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.8 * row_h;
            let t = ((r.features[f] - v0) / (v1 - v0)).clamp(0.0, 1.0);
            let red = (40.0 + 215.0 * t).round() as u8;
            let blue = (255.0 - 215.0 * t).round() as u8;
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#{red:02x}30{blue:02x}" fill-opacity="0.7"/>"##,
                px(r.shap[f]),
                cy + jitter
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SHAP value (margin units); colour: low (blue) to high (red) feature value</text>"#,
        MARGIN + 80.0 + span / 2.0,
        height - 18.0
    );
    out.push_str("</svg>\n");
    out
}

/// Scatter of a feature's value against its SHAP attribution.
pub fn dependence_svg(feature: &str, points: &[DependencePoint]) -> String {
    let mut out = String::new();
    header(&mut out, W, H, &format!("SHAP dependence: {feature}"));
    let (x0, x1) = range(points.iter().map(|p| p.feature_value));
    let (y0, y1) = range(points.iter().map(|p| p.shap_value));
    let ax = Axes { x0, x1, y0, y1, width: W, height: H };
    ax.draw(&mut out, feature, "SHAP value");
    for p in points {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f77b4" fill-opacity="0.6"/>"##,
            ax.px(p.feature_value),
            ax.py(p.shap_value)
        );
    }
    out.push_str("</svg>\n");
    out
}
