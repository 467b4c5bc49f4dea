//! Minimal SVG line plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl LinePlot<'_> {
    pub fn render(&self) -> String {
        let (x0, x1) = span(self.points.iter().map(|p| p.0));
        let (y0, y1) = span(self.points.iter().map(|p| p.1));
        let (y0, y1) = (y0.min(0.0), y1 * 1.05);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, W / 2.0, self.title).unwrap();
        let (left, right, top, bottom) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        writeln!(s, r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#).unwrap();
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, bottom + 16.0, tick(xv)).unwrap();
            writeln!(s, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, left - 6.0, tick(yv)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#, W / 2.0, H - 14.0, self.x_label).unwrap();
        writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, self.y_label).unwrap();
        let pts: Vec<String> = self
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for &(x, y) in &self.points {
            writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
                sx(x),
                sy(y)
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_points() {
        let svg = LinePlot {
            title: "t",
            x_label: "x",
            y_label: "y",
            points: vec![(1.0, 2.0), (2.0, 4.0), (3.0, 5.0)],
        }
        .render();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
