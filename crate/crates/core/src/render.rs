//! Deterministic SVG output for scenes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Rect, RegionTag, SceneGraph, SummaryKind};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("palette has no color for class {0:?}")]
    MissingColor(String),
    #[error("canvas must be positive, got {0}x{1}")]
    Canvas(f64, f64),
}

const CYCLE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn named_color(class: &str) -> Option<&'static str> {
    Some(match class.to_ascii_lowercase().as_str() {
        "benign" | "positive" => "#2ca02c",
        "malignant" | "negative" => "#d62728",
        "iris-setosa" | "setosa" => "#d62728",
        "iris-versicolor" | "versicolor" => "#1f77b4",
        "iris-virginica" | "virginica" => "#2ca02c",
        "class_1" => "#ff7f0e",
        "class_2" => "#2ca02c",
        "class_3" => "#1f77b4",
        _ => return None,
    })
}

/// Named classes get their usual colors; the rest cycle through a fixed list.
pub fn default_palette<S: AsRef<str>>(classes: &[S]) -> BTreeMap<String, String> {
    let mut next = 0;
    classes
        .iter()
        .map(|c| {
            let c = c.as_ref();
            let color = named_color(c).map(str::to_string).unwrap_or_else(|| {
                let color = CYCLE[next % CYCLE.len()];
                next += 1;
                color.to_string()
            });
            (c.to_string(), color)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub canvas: (f64, f64),
    pub margin: f64,
    pub palette: BTreeMap<String, String>,
    pub gray_ramp: (f64, f64),
    pub line_width: f64,
    pub frame_width: f64,
    pub font: String,
    pub font_size: f64,
    pub show_legend: bool,
    pub show_confusion: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            canvas: (1200.0, 800.0),
            margin: 60.0,
            palette: BTreeMap::new(),
            gray_ramp: crate::scene::GRAY_RAMP,
            line_width: 1.0,
            frame_width: 1.5,
            font: "sans-serif".into(),
            font_size: 12.0,
            show_legend: true,
            show_confusion: true,
        }
    }
}

impl RenderConfig {
    /// Default config with the default palette for the scene's classes.
    pub fn for_scene(scene: &SceneGraph) -> RenderConfig {
        RenderConfig {
            palette: default_palette(&scene_classes(scene)),
            ..Default::default()
        }
    }
}

fn scene_classes(scene: &SceneGraph) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let from_regions = scene
        .plots
        .iter()
        .flat_map(|p| p.regions.iter().filter_map(|r| r.class.clone()));
    let from_lines = scene
        .polylines
        .iter()
        .flat_map(|l| [l.actual.clone(), l.predicted.clone()]);
    for c in scene.evaluation.classes.iter().cloned().chain(from_regions).chain(from_lines) {
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Fixed four-decimal number, never `-0.0000`.
fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn gray_hex(luminance: f64) -> String {
    let g = (luminance.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{g:02x}{g:02x}{g:02x}")
}

/// Maps scene coordinates (y up) onto the canvas (y down) with a uniform scale.
struct Viewport {
    scale: f64,
    x0: f64,
    y1: f64,
    margin: f64,
}

impl Viewport {
    fn fit(scene: &SceneGraph, config: &RenderConfig) -> Viewport {
        let mut b = Rect {
            x0: f64::INFINITY,
            y0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y1: f64::NEG_INFINITY,
        };
        let mut grow = |x: f64, y: f64| {
            b.x0 = b.x0.min(x);
            b.y0 = b.y0.min(y);
            b.x1 = b.x1.max(x);
            b.y1 = b.y1.max(y);
        };
        for p in &scene.plots {
            let r = p.bounds();
            grow(r.x0, r.y0);
            grow(r.x1, r.y1);
        }
        for l in &scene.polylines {
            for v in &l.vertices {
                grow(v.x, v.y);
            }
        }
        if !b.x0.is_finite() {
            b = Rect {
                x0: 0.0,
                y0: 0.0,
                x1: 1.0,
                y1: 1.0,
            };
        }
        let (w, h) = config.canvas;
        let avail_w = (w - 2.0 * config.margin).max(1.0);
        let avail_h = (h - 2.0 * config.margin).max(1.0);
        let scale = (avail_w / (b.x1 - b.x0).max(1e-9)).min(avail_h / (b.y1 - b.y0).max(1e-9));
        Viewport {
            scale,
            x0: b.x0,
            y1: b.y1,
            margin: config.margin,
        }
    }

    fn x(&self, x: f64) -> f64 {
        self.margin + (x - self.x0) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        self.margin + (self.y1 - y) * self.scale
    }

    fn rect(&self, r: &Rect) -> (f64, f64, f64, f64) {
        (self.x(r.x0), self.y(r.y1), (r.x1 - r.x0) * self.scale, (r.y1 - r.y0) * self.scale)
    }
}

/// Standalone SVG 1.1 document for `scene`. Equal inputs give equal bytes.
pub fn to_svg(scene: &SceneGraph, config: &RenderConfig) -> Result<String, RenderError> {
    let (w, h) = config.canvas;
    if !(w > 0.0 && h > 0.0) {
        return Err(RenderError::Canvas(w, h));
    }
    let classes = scene_classes(scene);
    for c in &classes {
        if !config.palette.contains_key(c) {
            return Err(RenderError::MissingColor(c.clone()));
        }
    }
    let color = |c: &str| config.palette[c].as_str();
    let vp = Viewport::fit(scene, config);
    let fs = config.font_size;

    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="{}" font-size="{}">"#,
        num(w),
        num(h),
        num(w),
        num(h),
        escape(&config.font),
        num(fs)
    )
    .unwrap();
    writeln!(
        out,
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="#555555"/></marker></defs>"##
    )
    .unwrap();
    writeln!(out, r##"<rect class="canvas" x="0.0000" y="0.0000" width="{}" height="{}" fill="#ffffff"/>"##, num(w), num(h)).unwrap();

    let mut plots: Vec<_> = scene.plots.iter().collect();
    plots.sort_by_key(|p| p.plot_id);
    for plot in plots {
        let (x, y, pw, ph) = vp.rect(&plot.bounds());
        writeln!(out, r#"<g class="plot" data-plot="{}">"#, plot.plot_id).unwrap();
        let mut regions: Vec<_> = plot.regions.iter().collect();
        regions.sort_by(|a, b| {
            let key = |r: &crate::scene::SceneRegion| [r.rect.x0, r.rect.y0, r.rect.x1, r.rect.y1];
            key(a)
                .iter()
                .zip(key(b).iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.region.cmp(&b.region))
        });
        for r in regions {
            let (rx, ry, rw, rh) = vp.rect(&r.rect);
            let (fill, label) = match r.kind {
                RegionTag::Decided => {
                    let c = r.class.as_deref().expect("decided regions carry a class");
                    (color(c).to_string(), escape(c))
                }
                RegionTag::Undecided => {
                    let key = r.shade_key.unwrap_or(0);
                    let n = plot.regions.iter().filter(|q| q.kind == RegionTag::Undecided).count();
                    let (lo, hi) = config.gray_ramp;
                    let lum = if n <= 1 {
                        (lo + hi) / 2.0
                    } else {
                        lo + (hi - lo) * key as f64 / (n - 1) as f64
                    };
                    (gray_hex(lum), format!("to plot {}", r.dest.unwrap_or(0)))
                }
            };
            writeln!(
                out,
                r#"<rect class="region" data-region="{}" x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="{}"><title>{}</title></rect>"#,
                r.region,
                num(rx),
                num(ry),
                num(rw),
                num(rh),
                fill,
                num(r.intensity),
                label
            )
            .unwrap();
        }
        writeln!(
            out,
            r##"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333333" stroke-width="{}"/>"##,
            num(x),
            num(y),
            num(pw),
            num(ph),
            num(config.frame_width)
        )
        .unwrap();
        let arrow = |flipped: bool| if flipped { " (flipped)" } else { "" };
        writeln!(
            out,
            r#"<text class="axis" x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
            num(x + pw / 2.0),
            num(y + ph + fs * 1.4),
            escape(&plot.axes.h.attr),
            arrow(plot.axes.h.flipped)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text class="axis" x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}{}</text>"#,
            num(x - fs * 0.6),
            num(y + ph / 2.0),
            num(x - fs * 0.6),
            num(y + ph / 2.0),
            escape(&plot.axes.v.attr),
            arrow(plot.axes.v.flipped)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text class="plot-id" x="{}" y="{}">{}{}</text>"#,
            num(x),
            num(y - fs * 0.3),
            if plot.context { "context " } else { "P" },
            plot.plot_id
        )
        .unwrap();
        writeln!(out, "</g>").unwrap();
    }

    let mut lines: Vec<_> = scene.polylines.iter().collect();
    lines.sort_by_key(|l| l.case_id);
    for line in lines {
        let points: Vec<String> = line
            .vertices
            .iter()
            .map(|v| format!("{},{}", num(vp.x(v.x)), num(vp.y(v.y))))
            .collect();
        let opacity = if line.muted { "0.1500" } else { "0.7000" };
        match line.vertices.as_slice() {
            [] => {}
            [v] => writeln!(
                out,
                r#"<circle class="case" data-case="{}" cx="{}" cy="{}" r="{}" fill="{}" fill-opacity="{}"/>"#,
                line.case_id,
                num(vp.x(v.x)),
                num(vp.y(v.y)),
                num(1.5 * config.line_width),
                color(&line.actual),
                opacity
            )
            .unwrap(),
            _ => writeln!(
                out,
                r#"<polyline class="case" data-case="{}" points="{}" fill="none" stroke="{}" stroke-width="{}" stroke-opacity="{}" marker-end="url(#arrow)"/>"#,
                line.case_id,
                points.join(" "),
                color(&line.actual),
                num(config.line_width),
                opacity
            )
            .unwrap(),
        }
        if line.misclassified {
            if let Some(v) = line.terminal_vertex() {
                let s = 2.5 * config.line_width;
                writeln!(
                    out,
                    r##"<rect class="misclassified" data-case="{}" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000" stroke-width="{}"/>"##,
                    line.case_id,
                    num(vp.x(v.x) - s),
                    num(vp.y(v.y) - s),
                    num(2.0 * s),
                    num(2.0 * s),
                    num(config.line_width)
                )
                .unwrap();
            }
        }
    }

    for s in &scene.summaries {
        let points: Vec<String> = s
            .vertices
            .iter()
            .map(|v| format!("{},{}", num(vp.x(v.x)), num(vp.y(v.y))))
            .collect();
        let dash = if s.kind == SummaryKind::Center { "none" } else { "6 3" };
        writeln!(
            out,
            r#"<polyline class="summary" data-kind="{}" points="{}" fill="none" stroke="{}" stroke-width="{}" stroke-dasharray="{}"/>"#,
            match s.kind {
                SummaryKind::Center => "center",
                SummaryKind::Min => "min",
                SummaryKind::Max => "max",
            },
            points.join(" "),
            color(&s.class),
            num(3.0 * config.line_width),
            dash
        )
        .unwrap();
    }

    if config.show_legend {
        writeln!(out, r#"<g class="legend">"#).unwrap();
        for (i, c) in classes.iter().enumerate() {
            let y = 10.0 + i as f64 * fs * 1.5;
            writeln!(
                out,
                r#"<rect x="10.0000" y="{}" width="{}" height="{}" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                num(y),
                num(fs),
                num(fs),
                color(c),
                num(14.0 + fs),
                num(y + fs * 0.9),
                escape(c)
            )
            .unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    if config.show_confusion && !scene.evaluation.classes.is_empty() {
        writeln!(out, r#"<g class="confusion" font-family="monospace">"#).unwrap();
        for (i, row) in scene.evaluation.to_table().lines().enumerate() {
            writeln!(
                out,
                r#"<text x="10.0000" y="{}" xml:space="preserve">{}</text>"#,
                num(h - 10.0 - (scene.evaluation.classes.len() + 3 - i) as f64 * fs * 1.2),
                escape(row)
            )
            .unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}
