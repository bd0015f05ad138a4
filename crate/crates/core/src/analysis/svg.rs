//! Minimal SVG writer. Numbers are printed with fixed precision so output is
//! byte-stable.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut s = Svg { width, height, body: String::new() };
        s.rect(0.0, 0.0, width, height, "#ffffff");
        s
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width:.2}"/>"#
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width:.2}"/>"#,
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}"/>"#);
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size:.1}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Linear map from a data rectangle to a pixel rectangle (y up in data).
#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    /// Image-style axis: larger values further down.
    pub y_down: bool,
}

impl Axes {
    pub fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        self.left + (x - self.x0) / span * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        let f = (y - self.y0) / span;
        if self.y_down {
            self.top + f * self.height
        } else {
            self.top + (1.0 - f) * self.height
        }
    }

    /// Frame, corner tick labels and axis titles.
    pub fn draw(&self, svg: &mut Svg, x_label: &str, y_label: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        svg.line(l, t + h, l + w, t + h, "#000000", 1.0);
        svg.line(l, t, l, t + h, "#000000", 1.0);
        svg.text(l, t + h + 14.0, 10.0, "middle", &format!("{:.1}", self.x0));
        svg.text(l + w, t + h + 14.0, 10.0, "middle", &format!("{:.1}", self.x1));
        let (lo_y, hi_y) = if self.y_down { (t, t + h) } else { (t + h, t) };
        svg.text(l - 4.0, lo_y + 4.0, 10.0, "end", &format!("{:.0}", self.y0));
        svg.text(l - 4.0, hi_y + 4.0, 10.0, "end", &format!("{:.0}", self.y1));
        svg.text(l + w / 2.0, t + h + 28.0, 11.0, "middle", x_label);
        svg.text(l, t - 8.0, 11.0, "start", y_label);
    }
}
