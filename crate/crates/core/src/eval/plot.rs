//! Minimal SVG bar charts for error histograms.

use std::collections::BTreeMap;
use std::fmt::Write;

/// Bar chart of `proportion` per integer frame error.
pub fn histogram_svg(title: &str, hist: &BTreeMap<i64, f64>) -> String {
    let (w, h, margin) = (360.0, 220.0, 30.0);
    let lo = hist.keys().next().copied().unwrap_or(0).min(-3);
    let hi = hist.keys().last().copied().unwrap_or(0).max(3);
    let bins = (hi - lo + 1) as f64;
    let bar = (w - 2.0 * margin) / bins;
    let top = hist.values().copied().fold(0.0, f64::max).max(1e-9);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let base = h - margin;
    for k in lo..=hi {
        let x = margin + (k - lo) as f64 * bar;
        let p = hist.get(&k).copied().unwrap_or(0.0);
        let bh = p / top * (h - 2.0 * margin - 10.0);
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4a78b0"/>"##,
            base - bh,
            bar * 0.9
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#,
            x + bar * 0.45,
            base + 12.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{margin}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
        w - margin
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_bar_per_bin() {
        let h = BTreeMap::from([(-1, 0.25), (0, 0.5), (1, 0.25)]);
        let svg = histogram_svg("MVC <errors>", &h);
        assert_eq!(svg.matches("<rect").count(), 7);
        assert!(svg.contains("MVC &lt;errors&gt;"));
    }
}
