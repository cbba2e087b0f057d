//! Self-contained SVG of mean suboptimality against K.
//!
//! One panel per β, log-scaled K axis, one line per H with a shaded band between p10 and p90.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::HarnessError;
use crate::summary::SummaryRow;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const LEGEND_H: f64 = 28.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn push_unique<T: PartialEq + Copy>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders `summary` as an SVG document.
pub fn render_svg(summary: &[SummaryRow]) -> String {
    let mut betas: Vec<f64> = Vec::new();
    let mut horizons: Vec<usize> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    for r in summary {
        push_unique(&mut betas, r.beta);
        push_unique(&mut horizons, r.horizon);
        push_unique(&mut ks, r.k);
    }
    ks.sort_unstable();
    let y_max = summary
        .iter()
        .map(|r| r.p90.max(r.mean_suboptimality))
        .fold(0.0, f64::max);
    let y_top = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let (k_lo, k_hi) = (
        (ks.first().copied().unwrap_or(1).max(1) as f64).log10(),
        (ks.last().copied().unwrap_or(1).max(1) as f64).log10(),
    );
    let k_span = if k_hi > k_lo { k_hi - k_lo } else { 1.0 };

    let width = PANEL_W * betas.len().max(1) as f64;
    let height = PANEL_H + LEGEND_H;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = fmt(width),
        h = fmt(height)
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        fmt(width),
        fmt(height)
    );

    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    for (pi, &beta) in betas.iter().enumerate() {
        let x0 = pi as f64 * PANEL_W + MARGIN_L;
        let y0 = MARGIN_T;
        let sx = |k: usize| {
            if k_hi > k_lo {
                x0 + ((k.max(1) as f64).log10() - k_lo) / k_span * plot_w
            } else {
                x0 + plot_w / 2.0
            }
        };
        let sy = |v: f64| y0 + plot_h - v.max(0.0) / y_top * plot_h;

        let _ = writeln!(s, r#"<g class="panel" data-beta="{beta}">"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">β = {beta}</text>"#,
            fmt(x0 + plot_w / 2.0),
            fmt(y0 - 12.0)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            fmt(x0),
            fmt(y0),
            fmt(plot_w),
            fmt(plot_h)
        );
        for &k in &ks {
            let x = sx(k);
            let _ = writeln!(
                s,
                r##"<line x1="{x}" y1="{yb}" x2="{x}" y2="{yt}" stroke="#444"/><text x="{x}" y="{yl}" text-anchor="middle">{k}</text>"##,
                x = fmt(x),
                yb = fmt(y0 + plot_h),
                yt = fmt(y0 + plot_h + 4.0),
                yl = fmt(y0 + plot_h + 18.0)
            );
        }
        for i in 0..=4 {
            let v = y_top * i as f64 / 4.0;
            let y = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{xa}" y1="{y}" x2="{x0}" y2="{y}" stroke="#444"/><text x="{xl}" y="{yl}" text-anchor="end">{v:.3}</text>"##,
                xa = fmt(x0 - 4.0),
                x0 = fmt(x0),
                y = fmt(y),
                xl = fmt(x0 - 6.0),
                yl = fmt(y + 4.0)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">K (log scale)</text>"#,
            fmt(x0 + plot_w / 2.0),
            fmt(PANEL_H - 8.0)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate({},{}) rotate(-90)" text-anchor="middle">mean suboptimality</text>"#,
            fmt(x0 - 48.0),
            fmt(y0 + plot_h / 2.0)
        );

        for (hi, &h) in horizons.iter().enumerate() {
            let color = COLORS[hi % COLORS.len()];
            let mut pts: Vec<&SummaryRow> = summary
                .iter()
                .filter(|r| r.beta == beta && r.horizon == h)
                .collect();
            if pts.is_empty() {
                continue;
            }
            pts.sort_by_key(|r| r.k);
            let upper: Vec<String> = pts
                .iter()
                .map(|r| format!("{},{}", fmt(sx(r.k)), fmt(sy(r.p90))))
                .collect();
            let lower: Vec<String> = pts
                .iter()
                .rev()
                .map(|r| format!("{},{}", fmt(sx(r.k)), fmt(sy(r.p10))))
                .collect();
            let mean: Vec<String> = pts
                .iter()
                .map(|r| format!("{},{}", fmt(sx(r.k)), fmt(sy(r.mean_suboptimality))))
                .collect();
            let _ = writeln!(s, r#"<g class="series" data-h="{h}">"#);
            let _ = writeln!(
                s,
                r#"<polygon class="band" points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                mean.join(" ")
            );
            for r in &pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}"/>"#,
                    fmt(sx(r.k)),
                    fmt(sy(r.mean_suboptimality))
                );
            }
            let _ = writeln!(s, "</g>");
        }
        let _ = writeln!(s, "</g>");
    }

    let mut lx = MARGIN_L;
    let ly = PANEL_H + LEGEND_H / 2.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (hi, &h) in horizons.iter().enumerate() {
        let color = COLORS[hi % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            fmt(lx),
            fmt(lx + 20.0),
            fmt(lx + 24.0),
            fmt(ly + 4.0),
            escape(&format!("H = {h}")),
            y = fmt(ly)
        );
        lx += 80.0;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

pub fn emit_plot(summary: &[SummaryRow], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    if summary.is_empty() {
        return Err(HarnessError::Validation(
            "cannot plot an empty summary".into(),
        ));
    }
    let path = path.as_ref();
    std::fs::write(path, render_svg(summary)).map_err(|e| HarnessError::io(path, e))
}
