//! Standalone SVG bar charts for histograms.

use std::fmt::Write as _;

use crate::metrics::Histogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_histogram(hist: &Histogram, title: &str) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let peak = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar_w = plot_w / hist.bins() as f64;
    let base = HEIGHT - MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    for (i, &c) in hist.counts.iter().enumerate() {
        let h = plot_h * c as f64 / peak;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a78b0" stroke="white" stroke-width="0.5"/>"##,
            MARGIN + bar_w * i as f64,
            base - h,
            bar_w,
            h
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="black"/>"#
    );
    let label_y = base + 18.0;
    for (x, v) in [(MARGIN, hist.lo), (WIDTH - MARGIN, hist.hi)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{label_y}" font-family="sans-serif" font-size="11" text-anchor="middle">{v:.3}</text>"#
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
        MARGIN - 4.0,
        MARGIN + 4.0,
        peak as usize
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">0</text>"#,
        MARGIN - 4.0,
        base
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bar_per_bin() {
        let h = Histogram::new(&[0.0, 0.1, 0.9], 4, (0.0, 1.0)).unwrap();
        let svg = render_histogram(&h, "x1 <avg>");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("fill=\"#4a78b0\"").count(), 4);
        assert!(svg.contains("x1 &lt;avg&gt;"));
    }
}
