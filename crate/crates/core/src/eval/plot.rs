//! Minimal hand-written SVG charts. Output is deterministic for identical
//! inputs so plots can be hashed into run manifests.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map of `[lo, hi]` onto `[a, b]`; a flat range maps to the middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi - lo <= f64::EPSILON {
        (a + b) / 2.0
    } else {
        a + (v - lo) / (hi - lo) * (b - a)
    }
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = PAD + 16.0 * i as f64;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, W - 150.0, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, W - 135.0, escape(name));
    }
}

/// Overlay of planar paths with equal axis scaling.
pub fn trajectory_svg(title: &str, paths: &[(&str, Vec<[f64; 2]>)]) -> String {
    let pts = paths.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let side = (W - 2.0 * PAD - 150.0).min(H - 2.0 * PAD);
    let k = side / span;
    let mut s = header(title);
    for (i, (_, path)) in paths.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for p in path {
            let _ = write!(d, "{:.2},{:.2} ", PAD + (p[0] - x0) * k, H - PAD - (p[1] - y0) * k);
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, d.trim_end());
    }
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">scale: {:.1} m across</text>"#, H - 15.0, span);
    legend(&mut s, &paths.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Grouped bars: one group per label, one bar per series.
pub fn bars_svg(title: &str, y_label: &str, labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let top = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut s = header(title);
    let plot_w = W - 2.0 * PAD - 150.0;
    let group = plot_w / labels.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, PAD + plot_w, H - PAD);
    let _ = writeln!(s, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, escape(y_label));
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">max {:.3}</text>"#, PAD - 8.0, top);
    for (g, label) in labels.iter().enumerate() {
        let gx = PAD + group * g as f64 + group * 0.1;
        for (k, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(g).copied().unwrap_or(0.0).max(0.0);
            let h = scale(v, 0.0, top, 0.0, H - 2.0 * PAD);
            let c = PALETTE[k % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{c}"/>"#,
                gx + bar * k as f64,
                H - PAD - h,
                bar,
                h
            );
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, gx + group * 0.4, H - PAD + 16.0, escape(label));
    }
    legend(&mut s, &series.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Bars on the left axis with a line on an independent right axis, e.g.
/// per-sequence error next to relative improvement.
pub fn bar_line_svg(title: &str, labels: &[String], bars: (&str, &[f64]), line: (&str, &[f64])) -> String {
    let mut s = bars_svg(title, bars.0, labels, &[(bars.0, bars.1.to_vec())]);
    s.truncate(s.len() - "</svg>\n".len());
    let plot_w = W - 2.0 * PAD - 150.0;
    let group = plot_w / labels.len().max(1) as f64;
    let (lo, hi) = line
        .1
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), hi.max(0.0)) } else { (0.0, 1.0) };
    let mut d = String::new();
    for (g, &v) in line.1.iter().enumerate() {
        let x = PAD + group * (g as f64 + 0.5);
        let y = scale(v, lo, hi, H - PAD, PAD);
        let _ = write!(d, "{x:.2},{y:.2} ");
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, PALETTE[1]);
    }
    let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#, PALETTE[1], d.trim_end());
    let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{}">{}: {:.3} to {:.3}</text>"#, PAD, H - 15.0, PALETTE[1], escape(line.0), lo, hi);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svgs_are_well_formed_and_stable() {
        let a = trajectory_svg("t", &[("gt", vec![[0.0, 0.0], [10.0, 0.0]]), ("est", vec![[0.0, 0.0], [10.0, 1.0]])]);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert_eq!(a, trajectory_svg("t", &[("gt", vec![[0.0, 0.0], [10.0, 0.0]]), ("est", vec![[0.0, 0.0], [10.0, 1.0]])]));
        let labels = vec!["a".to_string(), "b&c".to_string()];
        let b = bar_line_svg("m", &labels, ("mse", &[1.0, 2.0]), ("gain", &[0.1, -0.2]));
        assert!(b.contains("b&amp;c") && b.ends_with("</svg>\n"));
        assert_eq!(b.matches("<svg").count(), 1);
        assert_eq!(trajectory_svg("empty", &[]).matches("<polyline").count(), 0);
    }
}
