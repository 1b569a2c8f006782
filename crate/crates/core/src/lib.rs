//! Decision trees drawn in shifted paired coordinates.
//!
//! A tree is split into plot units, each pairing two attributes. Every case
//! becomes a polyline hopping between plots until it lands in a region that
//! decides its class. Routing through the plots agrees with the tree's own
//! prediction for every case.

pub mod analysis;
pub mod dataset;
pub mod dtree;
pub mod fixtures;
pub mod pairing;
pub mod render;
pub mod scene;

pub use dataset::{load_csv, Case, CaseId, Dataset, LoadOptions, Range};
pub use dtree::{evaluate, induce_id3, DecisionTree, EvaluationReport, InduceParams, NodeId};
pub use pairing::{derive_plot_units, PairingPlan, PlotId, PlotUnit};
pub use render::{to_svg, RenderConfig};
pub use scene::{build_scene, default_placement, SceneGraph, SceneOptions};
