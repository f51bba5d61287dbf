//! Minimal hand-written SVG charts.

use std::fmt::Write;

use super::compare::{EvalReport, Predictions};

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN / 2.0, MARGIN / 1.5);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = W - MARGIN * 2.5;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 9.0, COLORS[i % COLORS.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(name));
    }
}

/// Predicted vs reference minute ventilation with the identity line.
pub fn scatter_svg(models: &[&Predictions]) -> String {
    let all = models.iter().flat_map(|p| p.reference.iter().chain(&p.predicted)).copied();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let sx = |v: f64| MARGIN + (v - lo) / (hi - lo) * (W - 1.5 * MARGIN);
    let sy = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 1.5 * MARGIN - MARGIN / 1.5);
    let mut s = open("Predicted vs reference minute ventilation");
    axes(&mut s, "reference (L/min)", "predicted (L/min)");
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        sx(lo),
        sy(lo),
        sx(hi),
        sy(hi)
    );
    for (i, p) in models.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (r, q) in p.reference.iter().zip(&p.predicted) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{color}" fill-opacity="0.5"/>"#,
                sx(*r),
                sy(*q)
            );
        }
    }
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">{lo:.1}</text>"#, H - MARGIN + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.1}</text>"#, W - MARGIN / 2.0, H - MARGIN + 14.0);
    legend(&mut s, &models.iter().map(|p| p.model_name.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Grouped bars of RMSE per artifact level, one colour per model.
pub fn level_bars_svg(reports: &[&EvalReport]) -> String {
    let mut levels: Vec<u8> = reports.iter().flat_map(|r| r.per_level_rmse.keys().copied()).collect();
    levels.sort_unstable();
    levels.dedup();
    let top = reports
        .iter()
        .flat_map(|r| r.per_level_rmse.values().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut s = open("RMSE by artifact level");
    axes(&mut s, "artifact level", "RMSE (L/min)");
    let plot_w = W - 1.5 * MARGIN;
    let plot_h = H - MARGIN - MARGIN / 1.5;
    let group = plot_w / levels.len().max(1) as f64;
    let bar = group * 0.8 / reports.len().max(1) as f64;
    for (gi, level) in levels.iter().enumerate() {
        let gx = MARGIN + gi as f64 * group + group * 0.1;
        for (mi, r) in reports.iter().enumerate() {
            let Some(v) = r.per_level_rmse.get(level) else { continue };
            let h = v / top * plot_h;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{} level {level}: {v:.3}</title></rect>"#,
                gx + mi as f64 * bar,
                H - MARGIN - h,
                bar,
                h,
                COLORS[mi % COLORS.len()],
                escape(&r.model_name)
            );
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{level}</text>"#, gx + group * 0.4, H - MARGIN + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{top:.2}</text>"#, MARGIN - 4.0, MARGIN / 1.5 + 4.0);
    legend(&mut s, &reports.iter().map(|r| r.model_name.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}
