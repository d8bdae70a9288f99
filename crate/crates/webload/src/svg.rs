//! Small static SVG charts. Output is deterministic for a given input.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| if hi - lo < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
        Frame { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<path d="M{x0} {y0}V{y1}H{x1}" stroke="black" fill="none"/>"#);
    for i in 0..=4 {
        let v = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let y = f.py(v);
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, x0 - 4.0, y + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn legend(out: &mut String, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        let y = TOP + 4.0 + 14.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{y}" width="10" height="10" fill="{}"/>"#, W - RIGHT - 110.0, color(i));
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, W - RIGHT - 96.0, y + 9.0, escape(n));
    }
}

/// Vertical bars, one per category.
pub fn bar_chart(title: &str, categories: &[String], values: &[f64], y_label: &str) -> String {
    grouped_bars(title, categories, &["".into()], &[values.to_vec()], y_label)
}

/// Bars grouped by category; `values[s][c]` is series `s` in category `c`.
pub fn grouped_bars(title: &str, categories: &[String], series: &[String], values: &[Vec<f64>], y_label: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let (lo, hi) = range(values.iter().flatten().copied().chain([0.0]));
    let f = Frame::new((0.0, categories.len().max(1) as f64), (lo.min(0.0), hi));
    axes(&mut out, &f, "", y_label);
    let slot = f.px(1.0) - f.px(0.0);
    let bar = 0.8 * slot / series.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        for (s, vals) in values.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            if !v.is_finite() {
                continue;
            }
            let x = f.px(c as f64) + 0.1 * slot + s as f64 * bar;
            let (y_top, y_base) = (f.py(v.max(0.0)), f.py(v.min(0.0)));
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{y_top:.1}" width="{bar:.1}" height="{:.1}" fill="{}"><title>{}: {v}</title></rect>"#,
                (y_base - y_top).max(0.5),
                color(s),
                escape(name)
            );
        }
        let label_x = f.px(c as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{label_x:.1}" y="{:.1}" text-anchor="end" transform="rotate(-45 {label_x:.1} {:.1})">{}</text>"#,
            H - BOTTOM + 12.0,
            H - BOTTOM + 12.0,
            escape(name)
        );
    }
    if series.len() > 1 {
        legend(&mut out, series);
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per series; series sharing a name share a colour, and the
/// flag draws a series dashed.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>, bool)], x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let xs = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let ys = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let f = Frame::new(xs, ys);
    axes(&mut out, &f, x_label, y_label);
    let mut names: Vec<String> = Vec::new();
    for (name, pts, dashed) in series {
        let i = names.iter().position(|n| n == name).unwrap_or_else(|| {
            names.push(name.clone());
            names.len() - 1
        });
        let mut d = String::new();
        for (j, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.1} {:.1}", if j == 0 { "M" } else { "L" }, f.px(*x), f.py(*y));
        }
        let dash = if *dashed { r#" stroke-dasharray="5 3""# } else { "" };
        let _ = writeln!(out, r#"<path d="{d}" stroke="{}" stroke-width="2" fill="none"{dash}/>"#, color(i));
    }
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Points coloured by label.
pub fn scatter(title: &str, points: &[(f64, f64, usize)], names: &[String]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let f = Frame::new(range(points.iter().map(|p| p.0)), range(points.iter().map(|p| p.1)));
    axes(&mut out, &f, "PC1", "PC2");
    for (x, y, l) in points {
        let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}" fill-opacity="0.7"/>"#, f.px(*x), f.py(*y), color(*l));
    }
    legend(&mut out, names);
    out.push_str("</svg>\n");
    out
}
