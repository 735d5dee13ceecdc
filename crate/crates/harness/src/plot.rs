//! Minimal SVG 1.1 charts: line charts with ±1σ bands, step histograms and
//! heat maps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A line with an optional standard-deviation band.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// `(x, y, band half-width)`.
    pub points: Vec<(f64, f64, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y0) / (self.y1 - self.y0) * self.height
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = writeln!(out, r##"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333"/>"##);
        for i in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * i as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * i as f64 / 4.0;
            let (px, py) = (self.px(fx), self.py(fy));
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
                t + h,
                t + h + 5.0,
                t + h + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{l:.2}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                l - 5.0,
                l - 8.0,
                py + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            l + w / 2.0,
            t + h + 42.0,
            escape(x_label)
        );
        let (cx, cy) = (l - 52.0, t + h / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{cy:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn legend(out: &mut String, names: &[&str], left: f64, top: f64) {
    for (i, name) in names.iter().enumerate() {
        let y = top + 18.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{left:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            left + 18.0,
            left + 24.0,
            y + 4.0,
            escape(name)
        );
    }
}

impl LineChart {
    pub fn render(&self) -> String {
        let finite = |v: f64| v.is_finite();
        let pts = || self.series.iter().flat_map(|s| s.points.iter()).filter(|p| finite(p.0) && finite(p.1));
        let (xmin, xmax) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (ymin, ymax) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            let band = p.2.filter(|s| s.is_finite()).unwrap_or(0.0);
            (a.min(p.1 - band), b.max(p.1 + band))
        });
        let (x0, x1) = padded(xmin, xmax);
        let (y0, y1) = padded(ymin, ymax);
        let frame = Frame {
            x0,
            x1,
            y0,
            y1,
            left: MARGIN_L,
            top: MARGIN_T,
            width: WIDTH - MARGIN_L - MARGIN_R,
            height: HEIGHT - MARGIN_T - MARGIN_B,
        };

        let mut out = String::new();
        header(&mut out, WIDTH, HEIGHT, &self.title);
        frame.axes(&mut out, &self.x_label, &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let good: Vec<_> = s.points.iter().filter(|p| finite(p.0) && finite(p.1)).collect();
            if good.iter().any(|p| p.2.is_some_and(|b| b.is_finite() && b > 0.0)) {
                let band = |p: &&(f64, f64, Option<f64>)| p.2.filter(|b| b.is_finite()).unwrap_or(0.0);
                let upper = good.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1 + band(p))));
                let lower = good.iter().rev().map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1 - band(p))));
                let poly: Vec<String> = upper.chain(lower).collect();
                let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" "));
            }
            let line: Vec<String> = good.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.0), frame.py(p.1))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
            for p in &good {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, frame.px(p.0), frame.py(p.1));
            }
        }
        let names: Vec<&str> = self.series.iter().map(|s| s.name.as_str()).collect();
        legend(&mut out, &names, WIDTH - MARGIN_R + 15.0, MARGIN_T + 10.0);
        out.push_str("</svg>\n");
        out
    }
}

/// Overlaid step histograms sharing one set of bin edges.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub title: String,
    pub x_label: String,
    pub edges: Vec<f64>,
    pub series: Vec<(String, Vec<u64>)>,
}

impl Histogram {
    pub fn render(&self) -> String {
        let ymax = self.series.iter().flat_map(|s| s.1.iter()).copied().max().unwrap_or(1).max(1) as f64;
        let frame = Frame {
            x0: *self.edges.first().unwrap_or(&0.0),
            x1: *self.edges.last().unwrap_or(&1.0),
            y0: 0.0,
            y1: ymax * 1.05,
            left: MARGIN_L,
            top: MARGIN_T,
            width: WIDTH - MARGIN_L - MARGIN_R,
            height: HEIGHT - MARGIN_T - MARGIN_B,
        };
        let mut out = String::new();
        header(&mut out, WIDTH, HEIGHT, &self.title);
        frame.axes(&mut out, &self.x_label, "count");
        for (i, (_, counts)) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut pts = vec![format!("{:.2},{:.2}", frame.px(self.edges[0]), frame.py(0.0))];
            for (k, &c) in counts.iter().enumerate() {
                let y = frame.py(c as f64);
                pts.push(format!("{:.2},{y:.2}", frame.px(self.edges[k])));
                pts.push(format!("{:.2},{y:.2}", frame.px(self.edges[k + 1])));
            }
            pts.push(format!("{:.2},{:.2}", frame.px(*self.edges.last().unwrap()), frame.py(0.0)));
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        }
        let names: Vec<&str> = self.series.iter().map(|s| s.0.as_str()).collect();
        legend(&mut out, &names, WIDTH - MARGIN_R + 15.0, MARGIN_T + 10.0);
        out.push_str("</svg>\n");
        out
    }
}

/// One heat-map panel over a regular grid.
#[derive(Debug, Clone)]
pub struct Heatmap {
    pub title: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major with `xs` outermost: `values[i * ys.len() + j]` is at `(xs[i], ys[j])`.
    pub values: Vec<f64>,
    /// `(x, y, symbol, colour)` markers drawn on top.
    pub markers: Vec<(f64, f64, char, String)>,
}

/// Heat-map panels side by side on a shared colour scale.
pub fn heatmaps(title: &str, panels: &[Heatmap]) -> String {
    let size = 300.0;
    let gap = 40.0;
    let width = MARGIN_L + panels.len() as f64 * (size + gap) + 20.0;
    let height = MARGIN_T + size + MARGIN_B + 10.0;
    let (lo, hi) = panels
        .iter()
        .flat_map(|p| p.values.iter())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut out = String::new();
    header(&mut out, width, height, title);
    for (k, p) in panels.iter().enumerate() {
        let frame = Frame {
            x0: p.xs[0],
            x1: *p.xs.last().unwrap(),
            y0: p.ys[0],
            y1: *p.ys.last().unwrap(),
            left: MARGIN_L + k as f64 * (size + gap),
            top: MARGIN_T + 10.0,
            width: size,
            height: size,
        };
        let cw = size / p.xs.len() as f64;
        let ch = size / p.ys.len() as f64;
        for (i, &x) in p.xs.iter().enumerate() {
            for (j, &y) in p.ys.iter().enumerate() {
                let v = p.values[i * p.ys.len() + j];
                let t = if v.is_finite() { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
                let shade = (255.0 * (1.0 - t)).round() as u8;
                let _ = write!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
                    frame.px(x) - cw / 2.0,
                    frame.py(y) - ch / 2.0,
                    cw + 0.05,
                    ch + 0.05
                );
            }
        }
        out.push('\n');
        frame.axes(&mut out, "x", "y");
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            frame.left + size / 2.0,
            frame.top - 4.0,
            escape(&p.title)
        );
        for (x, y, sym, color) in &p.markers {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="16" text-anchor="middle" fill="{}">{}</text>"#,
                frame.px(*x),
                frame.py(*y) + 5.0,
                escape(color),
                escape(&sym.to_string())
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
