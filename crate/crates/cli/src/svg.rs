//! Minimal, byte-deterministic SVG line plots of a summary table.

use crate::summary::SummaryTable;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, Default)]
pub struct PlotOptions {
    pub log_x: bool,
    pub log_y: bool,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const LEGEND: f64 = 150.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        Axis { lo, hi, log }
    }

    /// Position in [0, 1], or `None` when the value cannot be drawn.
    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn label(&self, t: f64) -> String {
        let v = self.lo + t * (self.hi - self.lo);
        if self.log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3e}")
        }
    }
}

/// Plot `metric`: one line per label with a shaded band.
pub fn render(table: &SummaryTable, metric: &str, opts: PlotOptions) -> String {
    let rows: Vec<_> = table.rows.iter().filter(|r| r.metric == metric && r.mean.is_some()).collect();
    let mut labels: Vec<&str> = Vec::new();
    for r in &rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let xs = |r: &&crate::summary::GroupRow| r.x.parse::<f64>().unwrap_or(f64::NAN);
    let x_axis = Axis::fit(rows.iter().map(xs), opts.log_x);
    let y_axis = Axis::fit(
        rows.iter().flat_map(|r| [r.mean, r.band_lo.filter(|_| !opts.log_y), r.band_hi]).flatten(),
        opts.log_y,
    );
    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |u: f64| MARGIN + u * plot_w;
    let py = |u: f64| HEIGHT - MARGIN - u * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(t),
            HEIGHT - MARGIN + 16.0,
            x_axis.label(t)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, py(t) + 4.0, y_axis.label(t));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN + plot_w / 2.0,
        HEIGHT - 16.0,
        table.kind.axis()
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.2}">{} (mean ± {}σ)</text>"#, MARGIN - 12.0, escape(metric), table.band);

    for (li, label) in labels.iter().enumerate() {
        let color = PALETTE[li % PALETTE.len()];
        let mut pts: Vec<(f64, f64, Option<f64>, Option<f64>)> = rows
            .iter()
            .filter(|r| r.label == *label)
            .filter_map(|r| {
                let x = x_axis.unit(xs(r))?;
                let y = y_axis.unit(r.mean?)?;
                let lo = r.band_lo.and_then(|v| y_axis.unit(v)).map(|u| u.max(0.0));
                let hi = r.band_hi.and_then(|v| y_axis.unit(v));
                Some((x, y, lo, hi))
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.iter().all(|p| p.2.is_some() && p.3.is_some()) && pts.len() > 1 {
            let upper = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.3.unwrap())));
            let lower = pts.iter().rev().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.2.unwrap())));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, poly.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = MARGIN + 14.0 * li as f64;
        let lx = WIDTH - LEGEND - MARGIN / 2.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
