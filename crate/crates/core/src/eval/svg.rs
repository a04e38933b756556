//! Minimal static SVG charts for the sweep and profile tables.

use std::fmt::Write;

use super::profiles::{ProfileGrid, UsageLevel};
use super::sweep::{SweepResult, Variant};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str, xticks: &[(f64, String)]) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
            W / 2.0
        );
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(out, r#"<path d="M{x0},{y1} V{y0} H{x1}" stroke="black" fill="none"/>"#);
        for (v, label) in xticks {
            let x = self.px(*v);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{}" stroke="black"/>"#,
                y0 + 4.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{}" text-anchor="middle">{label}</text>"#,
                y0 + 18.0
            );
        }
        for k in 0..=4 {
            let v = self.y.0 + (self.y.1 - self.y.0) * f64::from(k) / 4.0;
            let y = self.py(v);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="black"/>"#,
                x0 - 4.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
                x0 - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
            (x0 + x1) / 2.0,
            H - 10.0
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{ylabel}</text>"#,
            (y0 + y1) / 2.0
        );
    }
}

fn legend(out: &mut String, k: usize, label: &str) {
    let y = TOP + 10.0 + 18.0 * k as f64;
    let x = W - RIGHT + 15.0;
    let _ = writeln!(
        out,
        r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
        x + 20.0,
        COLORS[k]
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}">{label}</text>"#, x + 26.0, y + 4.0);
}

/// Test AUC against cutoff month, one line per model variant.
pub fn sweep_svg(result: &SweepResult) -> String {
    let mut months: Vec<u32> = result.cells.iter().map(|c| c.month).collect();
    months.sort_unstable();
    months.dedup();
    let (lo, hi) = match (months.first(), months.last()) {
        (Some(&a), Some(&b)) if a < b => (f64::from(a) - 0.5, f64::from(b) + 0.5),
        (Some(&a), _) => (f64::from(a) - 1.0, f64::from(a) + 1.0),
        _ => (0.0, 1.0),
    };
    let frame = Frame {
        x: (lo, hi),
        y: (0.4, 1.0),
    };
    let ticks: Vec<(f64, String)> = months.iter().map(|&m| (f64::from(m), m.to_string())).collect();
    let mut out = String::new();
    frame.axes(&mut out, "Test AUC by cutoff month", "month", "AUC", &ticks);
    for (k, v) in Variant::ALL.iter().enumerate() {
        let pts: Vec<(f64, f64)> = months
            .iter()
            .filter_map(|&m| {
                result
                    .auc(*v, m)
                    .map(|a| (frame.px(f64::from(m)), frame.py(a.clamp(0.4, 1.0))))
            })
            .collect();
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            path.join(" "),
            COLORS[k]
        );
        for (x, y) in &pts {
            let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{}"/>"#, COLORS[k]);
        }
        legend(&mut out, k, &format!("{} {}", v.model.label(), v.tuning.label()));
    }
    out.push_str("</svg>\n");
    out
}

/// Predicted probability with 90% interval per quintile, one series per
/// usage level.
pub fn profiles_svg(grid: &ProfileGrid) -> String {
    let frame = Frame {
        x: (0.5, 5.5),
        y: (0.0, 1.0),
    };
    let ticks: Vec<(f64, String)> = (1..=5).map(|q| (f64::from(q), format!("Q{q}"))).collect();
    let mut out = String::new();
    frame.axes(
        &mut out,
        "Predicted probability of reaching the level",
        "quintile",
        "probability",
        &ticks,
    );
    for (k, usage) in UsageLevel::ALL.iter().enumerate() {
        let shift = (k as f64 - 1.0) * 0.15;
        for q in 1..=5u8 {
            let r = grid.get(*usage, q);
            let x = frame.px(f64::from(q) + shift);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{}"/>"#,
                frame.py(r.lower),
                frame.py(r.upper),
                COLORS[k]
            );
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.1}" cy="{:.1}" r="4" fill="{}"/>"#,
                frame.py(r.probability),
                COLORS[k]
            );
        }
        legend(&mut out, k, &format!("{} usage", usage.label()));
    }
    out.push_str("</svg>\n");
    out
}
