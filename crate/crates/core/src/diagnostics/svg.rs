//! Minimal self-contained SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
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
    (lo, hi)
}

/// Line chart with one polyline per series and a simple legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (x0, x1) = extent(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.y.iter().copied()));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = write!(
        out,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = write!(
        out,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = HEIGHT / 2.0
    );
    for (v, anchor, x, y) in [
        (x0, "start", px(x0), HEIGHT - MARGIN + 16.0),
        (x1, "end", px(x1), HEIGHT - MARGIN + 16.0),
    ] {
        let _ = write!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#);
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = write!(out, r#"<text x="{}" y="{y}" text-anchor="end">{v:.3}</text>"#, MARGIN - 4.0);
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = write!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = write!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            ly - 9.0,
            WIDTH - MARGIN - 96.0,
            ly,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of `rows[k][b]` with values in `[0, 1]`: time down, band across.
pub fn heatmap(title: &str, rows: &[Vec<f64>]) -> String {
    let nr = rows.len().max(1) as f64;
    let nc = rows.first().map_or(1, Vec::len).max(1) as f64;
    let cw = (WIDTH - 2.0 * MARGIN) / nc;
    let ch = (HEIGHT - 2.0 * MARGIN) / nr;
    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for (k, row) in rows.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            let v = v.clamp(0.0, 1.0);
            let level = (255.0 * (1.0 - v)).round() as u8;
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({level},{level},255)"/>"#,
                MARGIN + b as f64 * cw,
                MARGIN + k as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">band</text><text x="16" y="{y}" transform="rotate(-90 16 {y})" text-anchor="middle">t</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        y = HEIGHT / 2.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, f64::NAN, 3.0];
        let s = line_chart("a < b", "x", "y", &[Series { name: "s", x: &x, y: &y }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        let h = heatmap("g", &[vec![0.0, 1.0], vec![0.5, 0.5]]);
        assert_eq!(h.matches("<rect").count(), 5);
    }
}
