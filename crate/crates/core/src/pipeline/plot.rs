//! Bare SVG line plots.

use std::fmt::Write;

use super::bench::SweepReport;
use super::HistogramDump;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Frame {
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut x0, mut x1, y0, mut y1) = (lo(xs), hi(xs), lo(ys).min(0.0), hi(ys));
        if !(x1 > x0) {
            x0 -= 0.5;
            x1 = x0 + 1.0;
        }
        if !(y1 > y0) {
            y1 = y0 + 1.0;
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn open(s: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, x, anchor) in [(f.x0, PAD, "start"), (f.x1, W - PAD, "end")] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-size="10">{v:.4}</text>"#, H - PAD + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{:.4}</text>"#, PAD - 4.0, PAD + 4.0, f.y1);
}

fn polyline(s: &mut String, f: &Frame, xs: &[f64], ys: &[f64], color: &str) {
    let pts: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
}

/// Smoothed counts against bin center, with the ground marked.
pub fn histogram_svg(dump: &HistogramDump) -> String {
    let h = &dump.histogram;
    let xs: Vec<f64> = (0..h.len()).map(|i| h.bin_center(i)).collect();
    let f = Frame::fit(&xs, &h.counts);
    let mut s = String::new();
    open(&mut s, &f, "height density", "z (m)", "points per bin");
    polyline(&mut s, &f, &xs, &h.counts, "steelblue");
    let gx = f.px(dump.ground.height.clamp(f.x0, f.x1));
    let _ = writeln!(
        s,
        r#"<line x1="{gx:.2}" y1="{PAD}" x2="{gx:.2}" y2="{}" stroke="crimson" stroke-dasharray="4 3"/>"#,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{}" font-size="11" fill="crimson">ground {:.4}</text>"#, gx + 4.0, PAD + 12.0, dump.ground.height);
    s.push_str("</svg>\n");
    s
}

/// Mean error against compressed ratio, log10 on the ratio axis.
pub fn sweep_svg(report: &SweepReport) -> String {
    let xs: Vec<f64> = report.rows.iter().map(|r| r.compressed_ratio.max(1e-6).log10()).collect();
    let ys: Vec<f64> = report.rows.iter().map(|r| 100.0 * r.mean_error).collect();
    let f = Frame::fit(&xs, &ys);
    let mut s = String::new();
    open(&mut s, &f, "compression sweep", "log10 compressed ratio", "mean error (%)");
    polyline(&mut s, &f, &xs, &ys, "darkorange");
    for (x, y) in xs.iter().zip(&ys) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="darkorange"/>"#, f.px(*x), f.py(*y));
    }
    s.push_str("</svg>\n");
    s
}
