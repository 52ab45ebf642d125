//! Run records and their JSON, CSV and SVG renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: Vec<String>,
    pub config: Value,
    /// `sha256:` git-style blob hash of the inputs.
    pub input_hash: String,
    pub outputs: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    #[serde(default)]
    pub stability_flags: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Hash of `blob <len>\0<bytes>` over the concatenated inputs, each prefixed
/// with its length so that boundaries matter.
pub fn content_hash(inputs: &[&[u8]]) -> String {
    let mut body = Vec::new();
    for part in inputs {
        body.extend_from_slice(format!("{}:", part.len()).as_bytes());
        body.extend_from_slice(part);
    }
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    format!("sha256:{}", hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip formatting, so CSV values re-parse exactly.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Plot {
    /// A single curve.
    Curve {
        title: String,
        x_label: String,
        y_label: String,
        points: Vec<(f64, f64)>,
    },
    /// Labelled points, coloured by class, plus an optional outline.
    Scatter {
        title: String,
        x_label: String,
        y_label: String,
        points: Vec<(f64, f64, String)>,
        outline: Vec<(f64, f64)>,
    },
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                (lo - 0.5 * (1.0 + lo.abs()) * 1e-3, hi + 0.5 * (1.0 + hi.abs()) * 1e-3)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(svg: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    let _ = writeln!(svg, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (v, x, anchor) in [(f.x0, l, "start"), (f.x1, r, "end")] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-size="11">{v:.6}</text>"#, b + 16.0);
    }
    for (v, y) in [(f.y0, b), (f.y1, t + 10.0)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{v:.6}</text>"#, l - 4.0);
    }
}

fn color(class: &str) -> &'static str {
    match class {
        "inside" => "#1f77b4",
        "boundary" => "#ff7f0e",
        "outside" => "#dddddd",
        _ => "#444444",
    }
}

/// Renders a plot; every data value is also written as text inside `<metadata>`.
pub fn render_svg(plot: &Plot) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    match plot {
        Plot::Curve { title, x_label, y_label, points } => {
            let f = Frame::fit(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
            axes(&mut svg, &f, title, x_label, y_label);
            let coords: Vec<String> = points.iter().map(|(x, y)| format!("{:.3},{:.3}", f.px(*x), f.py(*y))).collect();
            let _ = writeln!(svg, r##"<polyline fill="none" stroke="#1f77b4" points="{}"/>"##, coords.join(" "));
            svg.push_str("<metadata>\n");
            for (x, y) in points {
                let _ = writeln!(svg, "{} {}", num(*x), num(*y));
            }
            svg.push_str("</metadata>\n");
        }
        Plot::Scatter {
            title,
            x_label,
            y_label,
            points,
            outline,
        } => {
            let xs = points.iter().map(|p| p.0).chain(outline.iter().map(|p| p.0));
            let ys = points.iter().map(|p| p.1).chain(outline.iter().map(|p| p.1));
            let f = Frame::fit(xs, ys);
            axes(&mut svg, &f, title, x_label, y_label);
            for (x, y, class) in points {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="{}" class="{}"/>"#,
                    f.px(*x),
                    f.py(*y),
                    color(class),
                    escape(class)
                );
            }
            for (x, y) in outline {
                let _ = writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="1.2" fill="black"/>"#, f.px(*x), f.py(*y));
            }
            svg.push_str("<metadata>\n");
            for (x, y, class) in points {
                let _ = writeln!(svg, "{} {} {}", num(*x), num(*y), escape(class));
            }
            for (x, y) in outline {
                let _ = writeln!(svg, "{} {} outline", num(*x), num(*y));
            }
            svg.push_str("</metadata>\n");
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Where to write a record and its optional tabular and graphical payloads.
#[derive(Debug, Clone, Default)]
pub struct Emit {
    pub json: Option<PathBuf>,
    pub csv: Option<(PathBuf, Table)>,
    pub svg: Option<(PathBuf, Plot)>,
}

pub fn record_json(record: &RunRecord) -> Result<String> {
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    Ok(s)
}

/// Writes the requested files and returns their paths in write order.
pub fn emit_report(record: &RunRecord, emit: &Emit) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |path: &Path, body: String| -> Result<()> {
        std::fs::write(path, body)?;
        written.push(path.to_path_buf());
        Ok(())
    };
    if let Some(p) = &emit.json {
        put(p, record_json(record)?)?;
    }
    if let Some((p, table)) = &emit.csv {
        put(p, table.to_csv())?;
    }
    if let Some((p, plot)) = &emit.svg {
        put(p, render_svg(plot))?;
    }
    Ok(written)
}
