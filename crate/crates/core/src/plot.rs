//! Static SVG figures: the point cloud with fitted lines and, optionally, a
//! heatmap of the certificate multipliers.
//!
//! Output depends only on the inputs; all coordinates are printed with a
//! fixed number of decimals.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::geometry::{Dataset, LineParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub label: String,
    pub line: LineParams,
    pub color: String,
    pub dashed: bool,
}

impl Overlay {
    /// Overlay with the conventional colour for a method or `truth`.
    pub fn styled(label: &str, line: LineParams) -> Self {
        let (color, dashed) = match label {
            "truth" => ("#1f4fd1", true),
            "tls" => ("#d62728", false),
            "irls" => ("#2ca02c", false),
            "sdp" => ("#9467bd", false),
            _ => ("#ff7f0e", false),
        };
        Self {
            label: label.to_string(),
            line,
            color: color.to_string(),
            dashed,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Figure<'a> {
    pub dataset: Option<&'a Dataset>,
    /// Marks points drawn as outliers; must match the dataset length.
    pub outliers: Option<&'a [bool]>,
    pub overlays: Vec<Overlay>,
    pub gamma: Option<&'a DMatrix<f64>>,
    pub title: String,
}

const PANEL: f64 = 480.0;
const MARGIN: f64 = 40.0;
const HEAT: f64 = 360.0;

struct Frame {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl Frame {
    fn fit(d: Option<&Dataset>) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in d.into_iter().flat_map(|d| d.iter()) {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        if !lo[0].is_finite() {
            lo = [-1.0, -1.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        Frame {
            x0: cx - 0.5 * span,
            y0: cy - 0.5 * span,
            scale: PANEL / span,
        }
    }

    fn span(&self) -> f64 {
        PANEL / self.scale
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.x0) * self.scale,
            MARGIN + PANEL - (y - self.y0) * self.scale,
        )
    }

    /// Part of the line inside the data window, if any.
    fn clip(&self, l: &LineParams) -> Option<[(f64, f64); 2]> {
        let foot = (l.a * l.c, l.b * l.c);
        let dir = (-l.b, l.a);
        let (lo, hi) = ([self.x0, self.y0], [self.x0 + self.span(), self.y0 + self.span()]);
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for (p, v, a, b) in [(foot.0, dir.0, lo[0], hi[0]), (foot.1, dir.1, lo[1], hi[1])] {
            if v.abs() < 1e-15 {
                if p < a || p > b {
                    return None;
                }
            } else {
                let (s0, s1) = ((a - p) / v, (b - p) / v);
                t0 = t0.max(s0.min(s1));
                t1 = t1.min(s0.max(s1));
            }
        }
        (t0 < t1).then(|| {
            [
                self.px(foot.0 + t0 * dir.0, foot.1 + t0 * dir.1),
                self.px(foot.0 + t1 * dir.0, foot.1 + t1 * dir.1),
            ]
        })
    }
}

fn heat_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (1.0, 1.0 - t, 1.0 - t)
    } else {
        (1.0 + t, 1.0 + t, 1.0)
    };
    let c = |v: f64| (v * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(r), c(g), c(b))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(fig: &Figure) -> String {
    let width = 2.0 * MARGIN + PANEL + if fig.gamma.is_some() { HEAT + MARGIN } else { 0.0 };
    let height = 2.0 * MARGIN + PANEL;
    let frame = Frame::fit(fig.dataset);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !fig.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN:.0}" y="24" font-family="sans-serif" font-size="16">{}</text>"#,
            escape(&fig.title)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN:.0}" y="{MARGIN:.0}" width="{PANEL:.0}" height="{PANEL:.0}" fill="none" stroke="black"/>"#
    );

    let _ = writeln!(s, r#"<g id="lines">"#);
    for o in &fig.overlays {
        if let Some([(x1, y1), (x2, y2)]) = frame.clip(&o.line) {
            let dash = if o.dashed { r#" stroke-dasharray="8 5""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{}" stroke-width="2"{dash}><title>{}</title></line>"#,
                o.color,
                escape(&o.label)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="points">"#);
    if let Some(d) = fig.dataset {
        for (i, p) in d.iter().enumerate() {
            let (x, y) = frame.px(p.x, p.y);
            let outlier = fig.outliers.and_then(|o| o.get(i).copied()).unwrap_or(false);
            let fill = if outlier { "#888888" } else { "black" };
            let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{fill}"/>"#);
        }
    }
    let _ = writeln!(s, "</g>");

    if !fig.overlays.is_empty() {
        let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="13">"#);
        for (i, o) in fig.overlays.iter().enumerate() {
            let y = MARGIN + 18.0 + 18.0 * i as f64;
            let x = MARGIN + 10.0;
            let dash = if o.dashed { r#" stroke-dasharray="8 5""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x:.0}" y1="{y:.0}" x2="{:.0}" y2="{y:.0}" stroke="{}" stroke-width="2"{dash}/>"#,
                x + 28.0,
                o.color
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.0}" y="{:.0}">{}</text>"#,
                x + 34.0,
                y + 4.0,
                escape(&o.label)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    if let Some(g) = fig.gamma {
        let left = 2.0 * MARGIN + PANEL;
        let top = MARGIN + 0.5 * (PANEL - HEAT);
        let n = g.nrows().max(1);
        let cell = HEAT / n as f64;
        let amax = g.amax();
        let _ = writeln!(s, r#"<g id="gamma">"#);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let t = if amax > 0.0 { g[(i, j)] / amax } else { 0.0 };
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}" fill="{}"/>"#,
                    left + j as f64 * cell,
                    top + i as f64 * cell,
                    heat_color(t)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<rect x="{left:.0}" y="{top:.0}" width="{HEAT:.0}" height="{HEAT:.0}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{left:.0}" y="{:.0}" font-family="sans-serif" font-size="13">Gamma (max |entry| {amax:.3e})</text>"#,
            top - 8.0
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(fig: &Figure, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_svg(fig))
}

/// Reads the final `Gamma` block from a certificate trace file.
pub fn parse_trace_gamma(text: &str) -> Option<DMatrix<f64>> {
    let mut lines = text.lines().skip_while(|l| !l.starts_with("# Gamma"));
    let header = lines.next()?;
    let (r, c) = header.trim_start_matches("# Gamma").trim().split_once('x')?;
    let (r, c): (usize, usize) = (r.parse().ok()?, c.parse().ok()?);
    let mut vals = Vec::with_capacity(r * c);
    for l in lines.take(r) {
        for t in l.split_whitespace() {
            vals.push(t.parse::<f64>().ok()?);
        }
    }
    (vals.len() == r * c).then(|| DMatrix::from_row_slice(r, c, &vals))
}
