//! Render-ready scenes: placed plots, styled regions and one polyline per case.
//!
//! Every vertex keeps its position in the plot's unit square (`local`, in the
//! plan's h/v orientation). Scene coordinates are derived from it through the
//! plot placement, then condensation and jitter are applied. View edits only
//! touch placements and options and re-derive positions, so repeated edits
//! never accumulate rounding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Case, CaseId, Dataset, DatasetError, Range};
use crate::dtree::{evaluate, Classifier, DecisionTree, EvaluationReport, NodeId, TreeError};
use crate::pairing::{Bound, PairingError, PairingPlan, PlotId, PlotUnit, RegionKind};

/// Horizontal and vertical offset between consecutive default plots, in plot sizes.
pub const STAGGER: (f64, f64) = (1.25, 0.25);
/// Intensity of a region no case reaches.
pub const BASE_INTENSITY: f64 = 0.25;
/// Luminance bounds of the gray ramp for undecided regions.
pub const GRAY_RAMP: (f64, f64) = (0.35, 0.75);

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("unknown plot {0}")]
    UnknownPlot(PlotId),
    #[error("unknown region {1} in plot {0}")]
    UnknownRegion(PlotId, usize),
    #[error("invalid option: {0}")]
    Option(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    /// Stop at the plot whose region decides the class.
    #[default]
    Terminate,
    /// One vertex in every plot of the plan, in plan order.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryMode {
    #[default]
    None,
    Centers,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionRef {
    pub plot: PlotId,
    pub region: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneOptions {
    pub trace_mode: TraceMode,
    pub condensed_regions: BTreeSet<RegionRef>,
    pub jitter: f64,
    pub context: bool,
    pub summary: SummaryMode,
    /// Cases to draw; `None` draws all of them.
    pub case_selection: Option<BTreeSet<CaseId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPlacement {
    pub plot_id: PlotId,
    pub origin: [f64; 2],
    pub size: [f64; 2],
    #[serde(default)]
    pub h_flipped: bool,
    #[serde(default)]
    pub v_flipped: bool,
    #[serde(default)]
    pub swapped: bool,
}

impl PlotPlacement {
    pub fn at(plot_id: PlotId, origin: [f64; 2]) -> Self {
        PlotPlacement {
            plot_id,
            origin,
            size: [1.0, 1.0],
            h_flipped: false,
            v_flipped: false,
            swapped: false,
        }
    }

    fn staircase(k: usize) -> Self {
        Self::at(k, [k as f64 * STAGGER.0, k as f64 * STAGGER.1])
    }

    /// Context plots sit left of the root plot.
    fn context(plot_id: PlotId, j: usize) -> Self {
        Self::at(plot_id, [-((j + 1) as f64) * STAGGER.0, 0.0])
    }

    fn overlaps(&self, other: &PlotPlacement) -> bool {
        let a = (self.origin, self.size);
        let b = (other.origin, other.size);
        (0..2).all(|i| a.0[i] < b.0[i] + b.1[i] && b.0[i] < a.0[i] + a.1[i])
    }

    /// Unit-square position (plan orientation) to scene coordinates.
    pub fn project(&self, local: [f64; 2]) -> [f64; 2] {
        let [mut a, mut b] = if self.swapped { [local[1], local[0]] } else { local };
        if self.h_flipped {
            a = 1.0 - a;
        }
        if self.v_flipped {
            b = 1.0 - b;
        }
        [
            self.origin[0] + self.size[0] * a,
            self.origin[1] + self.size[1] * b,
        ]
    }
}

/// Unit-size plots in a left-to-right staircase.
pub fn default_placement(plan: &PairingPlan) -> Vec<PlotPlacement> {
    (0..plan.plots.len()).map(PlotPlacement::staircase).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisView {
    pub attr: String,
    pub thresholds: Vec<f64>,
    pub flipped: bool,
    pub range: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub h: AxisView,
    pub v: AxisView,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn from_corners(a: [f64; 2], b: [f64; 2]) -> Rect {
        Rect {
            x0: a[0].min(b[0]),
            y0: a[1].min(b[1]),
            x1: a[0].max(b[0]),
            y1: a[1].max(b[1]),
        }
    }

    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        self.x0 - tol <= x && x <= self.x1 + tol && self.y0 - tol <= y && y <= self.y1 + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionTag {
    Decided,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRegion {
    /// Interval on the attribute drawn horizontally.
    pub h_interval: Bound,
    /// Interval on the attribute drawn vertically.
    pub v_interval: Bound,
    pub kind: RegionTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dest: Option<PlotId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shade_key: Option<usize>,
    /// Gray luminance in [0, 1] for undecided regions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gray: Option<f64>,
    pub intensity: f64,
    pub count: usize,
    /// Index of the region in the plan's plot.
    pub region: usize,
    pub node: NodeId,
    pub rect: Rect,
    /// `[u0, v0, u1, v1]` in the plot's unit square, plan orientation.
    pub local: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlot {
    pub plot_id: PlotId,
    pub axes: Axes,
    pub origin: [f64; 2],
    pub size: [f64; 2],
    pub swapped: bool,
    /// Plot of attributes the tree does not use.
    pub context: bool,
    pub regions: Vec<SceneRegion>,
}

impl ScenePlot {
    pub fn placement(&self) -> PlotPlacement {
        PlotPlacement {
            plot_id: self.plot_id,
            origin: self.origin,
            size: self.size,
            h_flipped: self.axes.h.flipped,
            v_flipped: self.axes.v.flipped,
            swapped: self.swapped,
        }
    }

    pub fn bounds(&self) -> Rect {
        Rect {
            x0: self.origin[0],
            y0: self.origin[1],
            x1: self.origin[0] + self.size[0],
            y1: self.origin[1] + self.size[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub plot: PlotId,
    pub x: f64,
    pub y: f64,
    /// Case values of the plot's (h, v) attributes, plan orientation.
    pub raw: [Option<f64>; 2],
    pub local: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<usize>,
    pub imputed: bool,
    pub context: bool,
    /// Number of vertices merged into this position by condensation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condensed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub case_id: CaseId,
    pub actual: String,
    pub predicted: String,
    pub misclassified: bool,
    pub terminal_plot: PlotId,
    pub terminal_region: usize,
    /// Drawn semitransparent because a summary replaces it.
    pub muted: bool,
    pub vertices: Vec<Vertex>,
}

impl Polyline {
    pub fn terminal_vertex(&self) -> Option<&Vertex> {
        self.vertices
            .iter()
            .rev()
            .find(|v| v.plot == self.terminal_plot && !v.context)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryKind {
    Center,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub kind: SummaryKind,
    pub terminal_plot: PlotId,
    pub terminal_region: usize,
    pub class: String,
    pub members: usize,
    pub vertices: Vec<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub plots: Vec<ScenePlot>,
    pub polylines: Vec<Polyline>,
    pub summaries: Vec<SummaryLine>,
    pub evaluation: EvaluationReport,
    pub routing: BTreeMap<NodeId, PlotId>,
    pub options: SceneOptions,
    pub warnings: Vec<String>,
}

/// View-only edit of one plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewEdit {
    Relocate { origin: [f64; 2] },
    FlipH,
    FlipV,
    Swap,
}

/// Cases reaching each region of a plan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionCounts(pub BTreeMap<RegionRef, usize>);

impl RegionCounts {
    pub fn tally(tree: &DecisionTree, plan: &PairingPlan, dataset: &Dataset) -> Result<RegionCounts, SceneError> {
        let classifier = tree.bind(dataset)?;
        let mut counts = BTreeMap::new();
        for case in &dataset.cases {
            for v in plan.trace(&classifier, case)? {
                *counts
                    .entry(RegionRef {
                        plot: v.plot,
                        region: v.region,
                    })
                    .or_insert(0) += 1;
            }
        }
        Ok(RegionCounts(counts))
    }

    pub fn get(&self, r: RegionRef) -> usize {
        self.0.get(&r).copied().unwrap_or(0)
    }
}

/// Fill intensity for a region reached by `n` cases when the busiest has `n_max`.
pub fn density_intensity(n: usize, n_max: usize) -> f64 {
    if n == 0 || n_max == 0 {
        return BASE_INTENSITY;
    }
    BASE_INTENSITY + (1.0 - BASE_INTENSITY) * (1.0 + n as f64).ln() / (1.0 + n_max as f64).ln()
}

/// Gray luminance for the `key`-th of `n` undecided regions of a plot.
pub fn gray_level(key: usize, n: usize) -> f64 {
    let (lo, hi) = GRAY_RAMP;
    if n <= 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * key as f64 / (n - 1) as f64
    }
}

fn scene_plot(plot: &PlotUnit, placement: &PlotPlacement) -> ScenePlot {
    let n_gray = plot.regions.iter().filter(|r| !r.is_decided()).count();
    let regions = plot
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (h0, h1) = r.h_interval.clip(plot.h_range);
            let (v0, v1) = r.v_interval.clip(plot.v_range);
            let local = [
                plot.h_range.normalize(h0),
                plot.v_range.normalize(v0),
                plot.h_range.normalize(h1.max(h0)),
                plot.v_range.normalize(v1.max(v0)),
            ];
            let (class, dest, shade_key, gray) = match &r.kind {
                RegionKind::Decided { class, .. } => (Some(class.clone()), None, None, None),
                RegionKind::Undecided {
                    dest_plot,
                    shade_key,
                    ..
                } => (None, Some(*dest_plot), Some(*shade_key), Some(gray_level(*shade_key, n_gray))),
            };
            let (h_interval, v_interval) = if placement.swapped {
                (r.v_interval, r.h_interval)
            } else {
                (r.h_interval, r.v_interval)
            };
            SceneRegion {
                h_interval,
                v_interval,
                kind: if r.is_decided() {
                    RegionTag::Decided
                } else {
                    RegionTag::Undecided
                },
                class,
                dest,
                shade_key,
                gray,
                intensity: BASE_INTENSITY,
                count: 0,
                region: i,
                node: r.node(),
                rect: Rect::from_corners([0.0; 2], [0.0; 2]),
                local,
            }
        })
        .collect();
    let h = AxisView {
        attr: plot.h_attr.clone(),
        thresholds: plot.h_thresholds.clone(),
        flipped: placement.h_flipped,
        range: plot.h_range,
    };
    let v = AxisView {
        attr: plot.v_attr.clone(),
        thresholds: plot.v_thresholds.clone(),
        flipped: placement.v_flipped,
        range: plot.v_range,
    };
    let (mut h, mut v) = if placement.swapped { (v, h) } else { (h, v) };
    h.flipped = placement.h_flipped;
    v.flipped = placement.v_flipped;
    ScenePlot {
        plot_id: plot.plot_id,
        axes: Axes { h, v },
        origin: placement.origin,
        size: placement.size,
        swapped: placement.swapped,
        context: false,
        regions,
    }
}

/// Attribute pairs not used by the tree, in schema order; an odd one out is repeated.
pub fn context_pairs(tree: &DecisionTree, dataset: &Dataset) -> Vec<(String, String)> {
    let used = tree.attributes();
    let unused: Vec<&str> = dataset
        .attributes
        .iter()
        .map(|a| a.name.as_str())
        .filter(|n| !used.iter().any(|u| u == n))
        .collect();
    unused
        .chunks(2)
        .map(|c| (c[0].to_string(), c.get(1).unwrap_or(&c[0]).to_string()))
        .collect()
}

struct Router<'a> {
    classifier: Classifier<'a>,
    plan: &'a PairingPlan,
    dataset: &'a Dataset,
    context: Vec<(PlotId, usize, usize)>,
}

impl Router<'_> {
    fn polyline(&self, case: &Case, mode: TraceMode) -> Result<Polyline, SceneError> {
        let route = self.plan.trace(&self.classifier, case)?;
        let last = route.last().expect("a trace visits at least the root plot");
        let (terminal_plot, terminal_region) = (last.plot, last.region);
        let predicted = self.plan.plots[terminal_plot].regions[terminal_region]
            .class()
            .expect("trace ends in a decided region")
            .to_string();

        let mut vertices = Vec::new();
        for &(plot_id, a, b) in &self.context {
            let ra = &self.dataset.attributes[a];
            let rb = &self.dataset.attributes[b];
            let (va, vb) = (case.value(a), case.value(b));
            vertices.push(Vertex {
                plot: plot_id,
                x: 0.0,
                y: 0.0,
                raw: [va, vb],
                local: [
                    va.map_or(0.5, |x| ra.range().normalize(x)),
                    vb.map_or(0.5, |x| rb.range().normalize(x)),
                ],
                region: None,
                imputed: va.is_none() || vb.is_none(),
                context: true,
                condensed: None,
            });
        }
        let visits = match mode {
            TraceMode::Terminate => route,
            TraceMode::Full => (0..self.plan.plots.len())
                .map(|p| self.plan.visit(&self.classifier, case, p))
                .collect::<Result<_, _>>()?,
        };
        for v in visits {
            let plot = &self.plan.plots[v.plot];
            vertices.push(Vertex {
                plot: v.plot,
                x: 0.0,
                y: 0.0,
                raw: [v.raw.0, v.raw.1],
                local: [plot.h_range.normalize(v.point.0), plot.v_range.normalize(v.point.1)],
                region: Some(v.region),
                imputed: v.imputed,
                context: false,
                condensed: None,
            });
        }
        Ok(Polyline {
            case_id: case.id,
            actual: case.label.clone(),
            misclassified: case.label != predicted,
            predicted,
            terminal_plot,
            terminal_region,
            muted: false,
            vertices,
        })
    }
}

fn placement_for(placements: &[PlotPlacement], default: PlotPlacement) -> PlotPlacement {
    placements
        .iter()
        .find(|p| p.plot_id == default.plot_id)
        .cloned()
        .unwrap_or(default)
}

fn validate_options(options: &SceneOptions) -> Result<(), SceneError> {
    if !(options.jitter.is_finite() && options.jitter >= 0.0) {
        return Err(SceneError::Option(format!("jitter must be >= 0, got {}", options.jitter)));
    }
    Ok(())
}

/// One case as a polyline, projected with the given placements.
pub fn route_case(
    case: &Case,
    tree: &DecisionTree,
    plan: &PairingPlan,
    dataset: &Dataset,
    placements: &[PlotPlacement],
    mode: TraceMode,
) -> Result<Polyline, SceneError> {
    let router = Router {
        classifier: tree.bind(dataset)?,
        plan,
        dataset,
        context: Vec::new(),
    };
    let mut line = router.polyline(case, mode)?;
    for v in &mut line.vertices {
        let p = placement_for(placements, PlotPlacement::staircase(v.plot));
        [v.x, v.y] = p.project(v.local);
    }
    Ok(line)
}

/// Builds the full scene: styled regions, case polylines, density shading and
/// the evaluation of `tree` on `dataset`.
pub fn build_scene(
    tree: &DecisionTree,
    plan: &PairingPlan,
    dataset: &Dataset,
    placements: &[PlotPlacement],
    options: &SceneOptions,
) -> Result<SceneGraph, SceneError> {
    validate_options(options)?;
    let classifier = tree.bind(dataset)?;
    let mut plots: Vec<ScenePlot> = plan
        .plots
        .iter()
        .map(|p| scene_plot(p, &placement_for(placements, PlotPlacement::staircase(p.plot_id))))
        .collect();

    let mut context = Vec::new();
    if options.context {
        for (j, (a, b)) in context_pairs(tree, dataset).into_iter().enumerate() {
            let plot_id = plots.len();
            let placement = placement_for(placements, PlotPlacement::context(plot_id, j));
            let axis = |name: &str, flipped| -> Result<AxisView, SceneError> {
                Ok(AxisView {
                    attr: name.to_string(),
                    thresholds: Vec::new(),
                    flipped,
                    range: dataset.attribute_range(name)?,
                })
            };
            let (h, v) = (axis(&a, placement.h_flipped)?, axis(&b, placement.v_flipped)?);
            let (h, v) = if placement.swapped { (v, h) } else { (h, v) };
            plots.push(ScenePlot {
                plot_id,
                axes: Axes { h, v },
                origin: placement.origin,
                size: placement.size,
                swapped: placement.swapped,
                context: true,
                regions: Vec::new(),
            });
            let ia = dataset.attribute_index(&a).expect("context attribute from schema");
            let ib = dataset.attribute_index(&b).expect("context attribute from schema");
            context.push((plot_id, ia, ib));
        }
    }

    let router = Router {
        classifier,
        plan,
        dataset,
        context,
    };
    let selected = |c: &Case| {
        options
            .case_selection
            .as_ref()
            .is_none_or(|s| s.contains(&c.id))
    };
    let polylines = dataset
        .cases
        .iter()
        .filter(|c| selected(c))
        .map(|c| router.polyline(c, options.trace_mode))
        .collect::<Result<Vec<_>, _>>()?;

    let mut scene = SceneGraph {
        plots,
        polylines,
        summaries: Vec::new(),
        evaluation: evaluate(tree, dataset)?,
        routing: plan.routing.clone(),
        options: options.clone(),
        warnings: Vec::new(),
    };
    scene.check_overlaps();
    scene.apply_density(&RegionCounts::tally(tree, plan, dataset)?);
    scene.rebuild_summaries();
    scene.reproject();
    Ok(scene)
}

impl SceneGraph {
    /// A scene with no plots or cases.
    pub fn empty() -> SceneGraph {
        SceneGraph {
            plots: Vec::new(),
            polylines: Vec::new(),
            summaries: Vec::new(),
            evaluation: EvaluationReport::from_confusion(Vec::new(), Vec::new()),
            routing: BTreeMap::new(),
            options: SceneOptions::default(),
            warnings: Vec::new(),
        }
    }

    pub fn plot(&self, id: PlotId) -> Option<&ScenePlot> {
        self.plots.iter().find(|p| p.plot_id == id)
    }

    fn plot_index(&self, id: PlotId) -> Result<usize, SceneError> {
        self.plots
            .iter()
            .position(|p| p.plot_id == id)
            .ok_or(SceneError::UnknownPlot(id))
    }

    pub fn placements(&self) -> Vec<PlotPlacement> {
        self.plots.iter().map(ScenePlot::placement).collect()
    }

    pub fn region_count(&self) -> usize {
        self.plots.iter().map(|p| p.regions.len()).sum()
    }

    /// Region fill intensities from case counts, log-scaled against the busiest region.
    pub fn density_shading(&self, counts: &RegionCounts) -> SceneGraph {
        let mut out = self.clone();
        out.apply_density(counts);
        out
    }

    fn apply_density(&mut self, counts: &RegionCounts) {
        let n_max = counts.0.values().copied().max().unwrap_or(0);
        for plot in self.plots.iter_mut().filter(|p| !p.context) {
            for r in &mut plot.regions {
                let n = counts.get(RegionRef {
                    plot: plot.plot_id,
                    region: r.region,
                });
                r.count = n;
                r.intensity = density_intensity(n, n_max);
            }
        }
    }

    /// Collapses, per selected region, all vertices of one actual class onto
    /// their centroid. Selections accumulate; condensing twice changes nothing.
    pub fn condense(&self, selector: &BTreeSet<RegionRef>) -> Result<SceneGraph, SceneError> {
        for r in selector {
            let plot = &self.plots[self.plot_index(r.plot)?];
            if r.region >= plot.regions.len() {
                return Err(SceneError::UnknownRegion(r.plot, r.region));
            }
        }
        let mut out = self.clone();
        out.options.condensed_regions.extend(selector.iter().copied());
        out.reproject();
        Ok(out)
    }

    /// Removes regions from the condensation selection.
    pub fn uncondense(&self, selector: &BTreeSet<RegionRef>) -> SceneGraph {
        let mut out = self.clone();
        out.options.condensed_regions.retain(|r| !selector.contains(r));
        out.reproject();
        out
    }

    /// Spreads coincident vertices along an upper-left to lower-right diagonal.
    pub fn jitter_overlaps(&self, magnitude: f64) -> Result<SceneGraph, SceneError> {
        let mut out = self.clone();
        out.options.jitter = magnitude;
        validate_options(&out.options)?;
        out.reproject();
        Ok(out)
    }

    pub fn apply_transforms(&self, plot_id: PlotId, edit: ViewEdit) -> Result<SceneGraph, SceneError> {
        let idx = self.plot_index(plot_id)?;
        let mut out = self.clone();
        let plot = &mut out.plots[idx];
        match edit {
            ViewEdit::Relocate { origin } => {
                if !origin.iter().all(|v| v.is_finite()) {
                    return Err(SceneError::Option("origin must be finite".into()));
                }
                plot.origin = origin;
            }
            ViewEdit::FlipH => plot.axes.h.flipped = !plot.axes.h.flipped,
            ViewEdit::FlipV => plot.axes.v.flipped = !plot.axes.v.flipped,
            ViewEdit::Swap => {
                plot.swapped = !plot.swapped;
                std::mem::swap(&mut plot.axes.h.attr, &mut plot.axes.v.attr);
                std::mem::swap(&mut plot.axes.h.thresholds, &mut plot.axes.v.thresholds);
                std::mem::swap(&mut plot.axes.h.range, &mut plot.axes.v.range);
                for r in &mut plot.regions {
                    std::mem::swap(&mut r.h_interval, &mut r.v_interval);
                }
            }
        }
        out.check_overlaps();
        out.reproject();
        Ok(out)
    }

    /// Summary lines per terminal region and actual class; drawn cases are muted.
    pub fn with_summary(&self, mode: SummaryMode) -> SceneGraph {
        let mut out = self.clone();
        out.options.summary = mode;
        out.rebuild_summaries();
        out.reproject();
        out
    }

    /// Toggles context plots. They need the case values, so the scene is rebuilt.
    pub fn with_context(
        &self,
        tree: &DecisionTree,
        plan: &PairingPlan,
        dataset: &Dataset,
        on: bool,
    ) -> Result<SceneGraph, SceneError> {
        let options = SceneOptions {
            context: on,
            ..self.options.clone()
        };
        build_scene(tree, plan, dataset, &self.placements(), &options)
    }

    /// Distinct edges leaving a region: segments grouped by start position,
    /// destination plot and actual class.
    pub fn outgoing_bundles(&self, plot: PlotId, region: usize) -> usize {
        let mut bundles = BTreeSet::new();
        for line in &self.polylines {
            for w in line.vertices.windows(2) {
                if w[0].plot == plot && w[0].region == Some(region) && !w[0].context {
                    bundles.insert((w[0].x.to_bits(), w[0].y.to_bits(), w[1].plot, line.actual.clone()));
                }
            }
        }
        bundles.len()
    }

    fn check_overlaps(&mut self) {
        self.warnings.clear();
        let placements = self.placements();
        for (i, a) in placements.iter().enumerate() {
            for b in &placements[i + 1..] {
                if a.overlaps(b) {
                    self.warnings
                        .push(format!("plot {} overlaps plot {}", a.plot_id, b.plot_id));
                }
            }
        }
    }

    fn rebuild_summaries(&mut self) {
        self.summaries.clear();
        let mode = self.options.summary;
        for line in &mut self.polylines {
            line.muted = mode != SummaryMode::None;
        }
        if mode == SummaryMode::None {
            return;
        }
        let mut groups: BTreeMap<(PlotId, usize, &str, Vec<PlotId>), Vec<&Polyline>> = BTreeMap::new();
        for line in &self.polylines {
            let plots = line.vertices.iter().map(|v| v.plot).collect();
            groups
                .entry((line.terminal_plot, line.terminal_region, line.actual.as_str(), plots))
                .or_default()
                .push(line);
        }
        let kinds: &[SummaryKind] = match mode {
            SummaryMode::Centers => &[SummaryKind::Center],
            _ => &[SummaryKind::Min, SummaryKind::Max],
        };
        for ((terminal_plot, terminal_region, class, _), members) in groups {
            for &kind in kinds {
                let vertices = (0..members[0].vertices.len())
                    .map(|i| summarize(kind, members.iter().map(|l| &l.vertices[i])))
                    .collect();
                self.summaries.push(SummaryLine {
                    kind,
                    terminal_plot,
                    terminal_region,
                    class: class.to_string(),
                    members: members.len(),
                    vertices,
                });
            }
        }
    }

    /// Re-derives every scene coordinate from local positions, placements and options.
    fn reproject(&mut self) {
        let placements: BTreeMap<PlotId, PlotPlacement> =
            self.plots.iter().map(|p| (p.plot_id, p.placement())).collect();
        for plot in &mut self.plots {
            let pl = &placements[&plot.plot_id];
            for r in &mut plot.regions {
                r.rect = Rect::from_corners(pl.project([r.local[0], r.local[1]]), pl.project([r.local[2], r.local[3]]));
            }
        }

        // centroids of condensed groups, in local coordinates
        let condensed = &self.options.condensed_regions;
        let mut sums: BTreeMap<(RegionRef, &str), ([f64; 2], usize)> = BTreeMap::new();
        for line in &self.polylines {
            for v in &line.vertices {
                if let Some(r) = v.region.map(|region| RegionRef { plot: v.plot, region }) {
                    if condensed.contains(&r) {
                        let e = sums.entry((r, line.actual.as_str())).or_insert(([0.0; 2], 0));
                        e.0[0] += v.local[0];
                        e.0[1] += v.local[1];
                        e.1 += 1;
                    }
                }
            }
        }
        let centroids: BTreeMap<(RegionRef, String), ([f64; 2], usize)> = sums
            .into_iter()
            .map(|((r, c), (s, n))| ((r, c.to_string()), ([s[0] / n as f64, s[1] / n as f64], n)))
            .collect();

        for line in &mut self.polylines {
            for v in &mut line.vertices {
                let key = v
                    .region
                    .map(|region| (RegionRef { plot: v.plot, region }, line.actual.clone()));
                let (local, merged) = match key.and_then(|k| centroids.get(&k)) {
                    Some(&(c, n)) => (c, Some(n)),
                    None => (v.local, None),
                };
                v.condensed = merged;
                [v.x, v.y] = placements[&v.plot].project(local);
            }
        }
        for s in &mut self.summaries {
            for v in &mut s.vertices {
                [v.x, v.y] = placements[&v.plot].project(v.local);
            }
        }

        let magnitude = self.options.jitter;
        #[allow(clippy::type_complexity)]
        if magnitude > 0.0 {
            // (plot, x bits, y bits) -> (case, polyline index, vertex index)
            let mut stacks: BTreeMap<(PlotId, u64, u64), Vec<(CaseId, usize, usize)>> = BTreeMap::new();
            for (li, line) in self.polylines.iter().enumerate() {
                for (vi, v) in line.vertices.iter().enumerate() {
                    if v.condensed.is_none() {
                        stacks
                            .entry((v.plot, v.x.to_bits(), v.y.to_bits()))
                            .or_default()
                            .push((line.case_id, li, vi));
                    }
                }
            }
            let diag = std::f64::consts::FRAC_1_SQRT_2;
            for mut members in stacks.into_values().filter(|m| m.len() > 1) {
                members.sort_unstable();
                let k = members.len();
                for (i, &(_, li, vi)) in members.iter().enumerate() {
                    let t = magnitude * (i as f64 / (k - 1) as f64 - 0.5);
                    let v = &mut self.polylines[li].vertices[vi];
                    v.x += t * diag;
                    v.y -= t * diag;
                }
            }
        }
    }
}

fn summarize<'a>(kind: SummaryKind, vertices: impl Iterator<Item = &'a Vertex>) -> Vertex {
    let vs: Vec<&Vertex> = vertices.collect();
    let first = vs[0];
    let pick = |f: &dyn Fn(&Vertex) -> f64| -> f64 {
        match kind {
            SummaryKind::Center => vs.iter().map(|v| f(v)).sum::<f64>() / vs.len() as f64,
            SummaryKind::Min => vs.iter().map(|v| f(v)).fold(f64::INFINITY, f64::min),
            SummaryKind::Max => vs.iter().map(|v| f(v)).fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let raw_axis = |i: usize| -> Option<f64> {
        let vals: Option<Vec<f64>> = vs.iter().map(|v| v.raw[i]).collect();
        vals.map(|vals| match kind {
            SummaryKind::Center => vals.iter().sum::<f64>() / vals.len() as f64,
            SummaryKind::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
            SummaryKind::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    };
    Vertex {
        plot: first.plot,
        x: 0.0,
        y: 0.0,
        raw: [raw_axis(0), raw_axis(1)],
        local: [pick(&|v| v.local[0]), pick(&|v| v.local[1])],
        region: first.region,
        imputed: vs.iter().any(|v| v.imputed),
        context: first.context,
        condensed: None,
    }
}
