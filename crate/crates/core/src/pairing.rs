//! Pairing of tree attributes into shifted coordinate plots.
//!
//! A plot unit is rooted at a split node. Its horizontal attribute is the root's
//! attribute, absorbed together with any chain of splits on that same attribute.
//! Its vertical attribute is the first other attribute met below that chain
//! (the introducing node covering most cases wins when branches disagree); the
//! splits on it, again with their same-attribute chains, form the second level.
//! Whatever lies below those two levels and is not a leaf starts a new plot, and
//! the region leading to it is an undecided (gray) region.
//!
//! Regions always span the full attribute ranges: constraints from outside the
//! plot decide which cases arrive, not the geometry.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Case, Dataset, Range};
use crate::dtree::{Branch, Classifier, DecisionTree, Node, NodeId, TreeError};

pub type PlotId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum PairingError {
    #[error("tree has no splits; nothing to pair")]
    LeafOnlyTree,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("unknown plot {0}")]
    UnknownPlot(PlotId),
    #[error("point ({0}, {1}) lies outside the plot ranges")]
    OutOfRange(f64, f64),
    #[error("no region of plot {0} contains the point")]
    NoRegion(PlotId),
}

/// Half-open interval `[lo, hi)`; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bound {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Bound {
    pub const ALL: Bound = Bound { lo: None, hi: None };

    pub fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|lo| lo <= x) && self.hi.is_none_or(|hi| x < hi)
    }

    pub fn below(self, t: f64) -> Bound {
        Bound {
            lo: self.lo,
            hi: Some(self.hi.map_or(t, |h| h.min(t))),
        }
    }

    pub fn at_or_above(self, t: f64) -> Bound {
        Bound {
            lo: Some(self.lo.map_or(t, |l| l.max(t))),
            hi: self.hi,
        }
    }

    pub fn narrow(self, branch: Branch, t: f64) -> Bound {
        match branch {
            Branch::Low => self.below(t),
            Branch::High => self.at_or_above(t),
        }
    }

    /// Intersection with a closed range, as `(lo, hi)`; may be empty (`lo > hi`).
    pub fn clip(&self, range: Range) -> (f64, f64) {
        (
            self.lo.map_or(range.lo, |l| l.max(range.lo)),
            self.hi.map_or(range.hi, |h| h.min(range.hi)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionKind {
    Decided {
        class: String,
        leaf: NodeId,
    },
    Undecided {
        dest_plot: PlotId,
        shade_key: usize,
        node: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub h_interval: Bound,
    pub v_interval: Bound,
    #[serde(flatten)]
    pub kind: RegionKind,
}

impl Region {
    pub fn contains(&self, h: f64, v: f64) -> bool {
        self.h_interval.contains(h) && self.v_interval.contains(v)
    }

    pub fn is_decided(&self) -> bool {
        matches!(self.kind, RegionKind::Decided { .. })
    }

    pub fn class(&self) -> Option<&str> {
        match &self.kind {
            RegionKind::Decided { class, .. } => Some(class),
            RegionKind::Undecided { .. } => None,
        }
    }

    pub fn dest_plot(&self) -> Option<PlotId> {
        match self.kind {
            RegionKind::Undecided { dest_plot, .. } => Some(dest_plot),
            RegionKind::Decided { .. } => None,
        }
    }

    /// Tree node that ends the in-plot walk into this region.
    pub fn node(&self) -> NodeId {
        match self.kind {
            RegionKind::Decided { leaf, .. } => leaf,
            RegionKind::Undecided { node, .. } => node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotUnit {
    pub plot_id: PlotId,
    pub root_node: NodeId,
    pub h_attr: String,
    pub v_attr: String,
    pub h_range: Range,
    pub v_range: Range,
    pub h_thresholds: Vec<f64>,
    pub v_thresholds: Vec<f64>,
    pub regions: Vec<Region>,
    /// Split nodes drawn in this plot, in preorder.
    pub nodes: Vec<NodeId>,
    /// Plot and region whose cases continue here.
    pub parent: Option<(PlotId, usize)>,
}

impl PlotUnit {
    /// Both coordinates come from the same attribute.
    pub fn is_repeated(&self) -> bool {
        self.h_attr == self.v_attr
    }

    /// Index of the region containing `(h, v)`, ignoring plot ranges.
    pub fn locate(&self, h: f64, v: f64) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(h, v))
    }

    pub fn region_for_node(&self, node: NodeId) -> Option<usize> {
        self.regions.iter().position(|r| r.node() == node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingPlan {
    pub plots: Vec<PlotUnit>,
    pub root_plot: PlotId,
    /// Plot drawing each split node.
    pub routing: BTreeMap<NodeId, PlotId>,
}

/// One plot visited by a case.
#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub plot: PlotId,
    pub region: usize,
    /// The case's values for `(h_attr, v_attr)`.
    pub raw: (Option<f64>, Option<f64>),
    /// Position used for placement; missing coordinates are imputed to the
    /// midpoint of the region they were routed into.
    pub point: (f64, f64),
    pub imputed: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Level {
    Horizontal,
    Vertical,
}

/// Number of dataset cases passing through each node.
pub fn node_coverage(classifier: &Classifier<'_>, dataset: &Dataset) -> Vec<usize> {
    let tree = classifier.tree();
    let mut cover = vec![0usize; tree.nodes().len()];
    for case in &dataset.cases {
        let mut cur = tree.root();
        cover[cur] += 1;
        while let Some(s) = tree.split(cur) {
            cur = s.child(classifier.branch(cur, case).0);
            cover[cur] += 1;
        }
    }
    cover
}

fn attr_of(tree: &DecisionTree, id: NodeId) -> Option<&str> {
    tree.split(id).map(|s| s.attribute.as_str())
}

/// Picks the vertical attribute for a plot rooted at `root`.
fn vertical_attr(tree: &DecisionTree, root: NodeId, cover: &[usize]) -> String {
    let h = attr_of(tree, root).expect("plot root is a split");
    let mut candidates = Vec::new();
    let mut stack = vec![root];
    // preorder walk of the horizontal chain, low child first
    while let Some(id) = stack.pop() {
        match tree.node(id) {
            Some(Node::Split(s)) if s.attribute == h => {
                stack.push(s.high);
                stack.push(s.low);
            }
            Some(Node::Split(_)) => candidates.push(id),
            _ => {}
        }
    }
    let mut best: Option<NodeId> = None;
    for c in candidates {
        if best.is_none_or(|b| cover[c] > cover[b]) {
            best = Some(c);
        }
    }
    best.and_then(|b| attr_of(tree, b))
        .unwrap_or(h)
        .to_string()
}

/// Derives the plot units for `tree`, using `dataset` for ranges and coverage.
pub fn derive_plot_units(tree: &DecisionTree, dataset: &Dataset) -> Result<PairingPlan, PairingError> {
    if tree.is_leaf_only() {
        return Err(PairingError::LeafOnlyTree);
    }
    let classifier = tree.bind(dataset)?;
    let cover = node_coverage(&classifier, dataset);
    let range = |attr: &str| {
        dataset
            .attribute_range(attr)
            .map_err(|_| TreeError::UnknownAttribute(attr.to_string()))
    };

    let mut plots: Vec<PlotUnit> = Vec::new();
    let mut routing = BTreeMap::new();
    let mut queue: VecDeque<(NodeId, Option<(PlotId, usize)>)> = VecDeque::new();
    queue.push_back((tree.root(), None));
    let mut next_id: PlotId = 1;

    while let Some((root, parent)) = queue.pop_front() {
        let plot_id = plots.len();
        let h_attr = attr_of(tree, root).unwrap().to_string();
        let v_attr = vertical_attr(tree, root, &cover);
        let mut plot = PlotUnit {
            plot_id,
            root_node: root,
            h_range: range(&h_attr)?,
            v_range: range(&v_attr)?,
            h_attr,
            v_attr,
            h_thresholds: Vec::new(),
            v_thresholds: Vec::new(),
            regions: Vec::new(),
            nodes: Vec::new(),
            parent,
        };
        let mut shade = 0;
        // explicit stack keeps the low-first preorder of regions
        let mut stack = vec![(root, Level::Horizontal, Bound::ALL, Bound::ALL)];
        while let Some((id, level, hb, vb)) = stack.pop() {
            match tree.node(id).expect("child ids are valid") {
                Node::Leaf(l) => plot.regions.push(Region {
                    h_interval: hb,
                    v_interval: vb,
                    kind: RegionKind::Decided {
                        class: l.class.clone(),
                        leaf: id,
                    },
                }),
                Node::Split(s) => {
                    let on_h = level == Level::Horizontal && s.attribute == plot.h_attr;
                    let on_v = !plot.is_repeated() && s.attribute == plot.v_attr;
                    if on_h || on_v {
                        let next_level = if on_h { Level::Horizontal } else { Level::Vertical };
                        plot.nodes.push(id);
                        routing.insert(id, plot_id);
                        let (low_b, high_b) = if on_h {
                            plot.h_thresholds.push(s.threshold);
                            (
                                (hb.below(s.threshold), vb),
                                (hb.at_or_above(s.threshold), vb),
                            )
                        } else {
                            plot.v_thresholds.push(s.threshold);
                            (
                                (hb, vb.below(s.threshold)),
                                (hb, vb.at_or_above(s.threshold)),
                            )
                        };
                        stack.push((s.high, next_level, high_b.0, high_b.1));
                        stack.push((s.low, next_level, low_b.0, low_b.1));
                    } else {
                        let region = plot.regions.len();
                        plot.regions.push(Region {
                            h_interval: hb,
                            v_interval: vb,
                            kind: RegionKind::Undecided {
                                dest_plot: next_id,
                                shade_key: shade,
                                node: id,
                            },
                        });
                        shade += 1;
                        next_id += 1;
                        queue.push_back((id, Some((plot_id, region))));
                    }
                }
            }
        }
        for ts in [&mut plot.h_thresholds, &mut plot.v_thresholds] {
            ts.sort_by(f64::total_cmp);
            ts.dedup();
        }
        plots.push(plot);
    }

    Ok(PairingPlan {
        plots,
        root_plot: 0,
        routing,
    })
}

impl PairingPlan {
    pub fn plot(&self, id: PlotId) -> Result<&PlotUnit, PairingError> {
        self.plots.get(id).ok_or(PairingError::UnknownPlot(id))
    }

    /// Region containing a point given as (h value, v value). For plots whose
    /// two coordinates repeat one attribute only the horizontal value matters.
    pub fn region_of(&self, plot_id: PlotId, point: (f64, f64)) -> Result<&Region, PairingError> {
        let plot = self.plot(plot_id)?;
        let (h, v) = point;
        if !plot.h_range.contains(h) || !plot.v_range.contains(v) {
            return Err(PairingError::OutOfRange(h, v));
        }
        plot.locate(h, v)
            .map(|i| &plot.regions[i])
            .ok_or(PairingError::NoRegion(plot_id))
    }

    pub fn decided_region_count(&self) -> usize {
        self.plots
            .iter()
            .flat_map(|p| &p.regions)
            .filter(|r| r.is_decided())
            .count()
    }

    pub fn undecided_region_count(&self) -> usize {
        self.plots
            .iter()
            .flat_map(|p| &p.regions)
            .filter(|r| !r.is_decided())
            .count()
    }

    /// Routes one case from the root plot until a decided region.
    ///
    /// Present coordinates are located geometrically. A missing coordinate is
    /// routed the way the tree routes it and then placed at the midpoint of the
    /// reached region along that axis.
    pub fn trace(&self, classifier: &Classifier<'_>, case: &Case) -> Result<Vec<Visit>, PairingError> {
        let mut visits = Vec::new();
        let mut plot_id = self.root_plot;
        loop {
            let visit = self.visit(classifier, case, plot_id)?;
            let next = self.plots[plot_id].regions[visit.region].dest_plot();
            visits.push(visit);
            match next {
                Some(p) => plot_id = p,
                None => return Ok(visits),
            }
        }
    }

    /// Position and region of a case in one plot, whether or not its route
    /// passes through that plot.
    pub fn visit(&self, classifier: &Classifier<'_>, case: &Case, plot_id: PlotId) -> Result<Visit, PairingError> {
        let plot = self.plot(plot_id)?;
        let column = |attr: &str| {
            plot.nodes
                .iter()
                .chain(std::iter::once(&plot.root_node))
                .find(|&&n| attr_of(classifier.tree(), n) == Some(attr))
                .and_then(|&n| classifier.attribute_column(n))
        };
        let h_col = column(&plot.h_attr);
        let v_col = if plot.is_repeated() { h_col } else { column(&plot.v_attr) };
        let raw_h = h_col.and_then(|c| case.value(c));
        let raw_v = v_col.and_then(|c| case.value(c));

        let (region, point, imputed) = match (raw_h, raw_v) {
            (Some(h), Some(v)) => (
                plot.locate(h, v).ok_or(PairingError::NoRegion(plot_id))?,
                (h, v),
                false,
            ),
            _ => {
                let region = self.walk_in_plot(classifier, case, plot)?;
                let r = &plot.regions[region];
                let mid = |b: &Bound, range: Range| {
                    let (lo, hi) = b.clip(range);
                    (lo + hi) / 2.0
                };
                let h = raw_h.unwrap_or_else(|| mid(&r.h_interval, plot.h_range));
                let v = if plot.is_repeated() {
                    h
                } else {
                    raw_v.unwrap_or_else(|| mid(&r.v_interval, plot.v_range))
                };
                (region, (h, v), true)
            }
        };
        Ok(Visit {
            plot: plot_id,
            region,
            raw: (raw_h, raw_v),
            point,
            imputed,
        })
    }

    /// Follows the tree through the plot's own splits.
    fn walk_in_plot(&self, classifier: &Classifier<'_>, case: &Case, plot: &PlotUnit) -> Result<usize, PairingError> {
        let tree = classifier.tree();
        let mut cur = plot.root_node;
        while plot.nodes.contains(&cur) {
            let s = tree.split(cur).expect("plot nodes are splits");
            cur = s.child(classifier.branch(cur, case).0);
        }
        plot.region_for_node(cur).ok_or(PairingError::NoRegion(plot.plot_id))
    }
}
