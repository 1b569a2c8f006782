//! Sessions: one dataset, one working tree and its view state.
//!
//! Edits run under the session's writer lock and are computed on copies, so a
//! failed edit leaves the session as it was. Each successful edit publishes a
//! fresh immutable scene; readers only clone the published `Arc`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use spcdt::analysis::{margins, overgeneralization, split_compare, MarginReport, OvergenReport, SplitCompareReport};
use spcdt::dataset::{load_csv, CaseId, Dataset, DatasetError, LoadOptions};
use spcdt::dtree::{induce_id3, DecisionTree, EvaluationReport, InduceParams, NodeId, TreeError};
use spcdt::fixtures;
use spcdt::pairing::{derive_plot_units, PairingError, PairingPlan, PlotId};
use spcdt::scene::{
    build_scene, default_placement, PlotPlacement, RegionRef, SceneError, SceneGraph, SceneOptions, SummaryMode,
    TraceMode,
};

pub type SessionId = String;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tree(TreeError),
    #[error(transparent)]
    Pairing(PairingError),
    #[error(transparent)]
    Scene(SceneError),
}

impl From<TreeError> for SessionError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::UnknownNode(n) => SessionError::UnknownNode(n),
            other => SessionError::Tree(other),
        }
    }
}

impl From<PairingError> for SessionError {
    fn from(e: PairingError) -> Self {
        match e {
            PairingError::Tree(t) => t.into(),
            other => SessionError::Pairing(other),
        }
    }
}

impl From<SceneError> for SessionError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Tree(t) => t.into(),
            SceneError::Pairing(p) => p.into(),
            other => SessionError::Scene(other),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Bundled dataset (`iris`, `wine`, `wbc`) or a CSV file stem in the data directory.
    pub dataset_id: Option<String>,
    /// Inline CSV text.
    pub csv: Option<String>,
    pub label_column: Option<String>,
    pub missing_token: Option<String>,
    #[serde(default)]
    pub declared_ranges: BTreeMap<String, [f64; 2]>,
    pub tree_json: Option<serde_json::Value>,
    pub tree_text: Option<String>,
    pub induce_params: Option<InduceParams>,
    pub placements: Option<Vec<PlotPlacement>>,
    pub options: Option<SceneOptions>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    H,
    V,
}

fn yes() -> bool {
    true
}

/// View-only edits; none of them touches the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutEdit {
    Relocate { plot: PlotId, origin: [f64; 2] },
    Flip { plot: PlotId, axis: Axis },
    Swap { plot: PlotId },
    Condense {
        regions: Vec<RegionRef>,
        #[serde(default = "yes")]
        on: bool,
    },
    Jitter(f64),
    TraceMode(TraceMode),
    Context(bool),
    Summary(SummaryMode),
    CaseSelection(Option<BTreeSet<CaseId>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDelta {
    pub error_rate_before: f64,
    pub error_rate_after: f64,
    /// Cases whose predicted class changed.
    pub changed_cases: Vec<CaseId>,
}

/// Everything needed to restore a session elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
    pub tree: DecisionTree,
    pub placements: Vec<PlotPlacement>,
    pub options: SceneOptions,
}

#[derive(Debug, Clone)]
struct ViewState {
    tree: DecisionTree,
    placements: Vec<PlotPlacement>,
    options: SceneOptions,
}

struct Working {
    view: ViewState,
    plan: PairingPlan,
    undo: Vec<ViewState>,
}

pub struct Session {
    pub id: SessionId,
    dataset_id: Option<String>,
    dataset: Arc<Dataset>,
    working: Mutex<Working>,
    published: RwLock<Arc<SceneGraph>>,
}

fn render(dataset: &Dataset, view: &ViewState) -> Result<(PairingPlan, SceneGraph), SessionError> {
    let plan = derive_plot_units(&view.tree, dataset)?;
    let scene = build_scene(&view.tree, &plan, dataset, &view.placements, &view.options)?;
    Ok((plan, scene))
}

impl Session {
    fn new(id: SessionId, dataset_id: Option<String>, dataset: Dataset, view: ViewState) -> Result<Session, SessionError> {
        let (plan, scene) = render(&dataset, &view)?;
        Ok(Session {
            id,
            dataset_id,
            dataset: Arc::new(dataset),
            working: Mutex::new(Working {
                view,
                plan,
                undo: Vec::new(),
            }),
            published: RwLock::new(Arc::new(scene)),
        })
    }

    /// The current published scene.
    pub fn scene(&self) -> Arc<SceneGraph> {
        self.published.read().clone()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn tree(&self) -> DecisionTree {
        self.working.lock().view.tree.clone()
    }

    pub fn evaluation(&self) -> EvaluationReport {
        self.scene().evaluation.clone()
    }

    pub fn plan(&self) -> PairingPlan {
        self.working.lock().plan.clone()
    }

    pub fn undo_depth(&self) -> usize {
        self.working.lock().undo.len()
    }

    fn commit(&self, w: &mut Working, view: ViewState) -> Result<Arc<SceneGraph>, SessionError> {
        let (plan, scene) = render(&self.dataset, &view)?;
        let scene = Arc::new(scene);
        let previous = std::mem::replace(&mut w.view, view);
        w.undo.push(previous);
        w.plan = plan;
        *self.published.write() = scene.clone();
        Ok(scene)
    }

    /// Moves one split threshold and reports how predictions changed.
    pub fn adjust_threshold(&self, node: NodeId, value: f64) -> Result<(Arc<SceneGraph>, EvaluationDelta), SessionError> {
        let mut w = self.working.lock();
        let before = self.published.read().clone();
        let tree = w.view.tree.adjust_threshold(node, value)?;
        let view = ViewState {
            tree,
            ..w.view.clone()
        };
        let old = w.view.tree.bind(&self.dataset)?;
        let new = view.tree.bind(&self.dataset)?;
        let changed_cases = self
            .dataset
            .cases
            .iter()
            .filter(|c| old.predict(c).class != new.predict(c).class)
            .map(|c| c.id)
            .collect();
        let scene = self.commit(&mut w, view)?;
        let delta = EvaluationDelta {
            error_rate_before: before.evaluation.error_rate,
            error_rate_after: scene.evaluation.error_rate,
            changed_cases,
        };
        Ok((scene, delta))
    }

    pub fn edit_layout(&self, edit: LayoutEdit) -> Result<Arc<SceneGraph>, SessionError> {
        let mut w = self.working.lock();
        let mut view = w.view.clone();
        let n_plots = self.published.read().plots.len();
        let placement = |view: &mut ViewState, plot: PlotId| -> Result<usize, SessionError> {
            if plot >= n_plots {
                return Err(SessionError::Invalid(format!("unknown plot {plot}")));
            }
            if let Some(i) = view.placements.iter().position(|p| p.plot_id == plot) {
                return Ok(i);
            }
            let current = self.published.read().plots.iter().find(|p| p.plot_id == plot).map(|p| p.placement());
            view.placements.push(current.expect("plot exists in the scene"));
            Ok(view.placements.len() - 1)
        };
        match edit {
            LayoutEdit::Relocate { plot, origin } => {
                if !origin.iter().all(|v| v.is_finite()) {
                    return Err(SessionError::Invalid("origin must be finite".into()));
                }
                let i = placement(&mut view, plot)?;
                view.placements[i].origin = origin;
            }
            LayoutEdit::Flip { plot, axis } => {
                let i = placement(&mut view, plot)?;
                let p = &mut view.placements[i];
                match axis {
                    Axis::H => p.h_flipped = !p.h_flipped,
                    Axis::V => p.v_flipped = !p.v_flipped,
                }
            }
            LayoutEdit::Swap { plot } => {
                let i = placement(&mut view, plot)?;
                let p = &mut view.placements[i];
                // flips stay with the screen axes
                p.swapped = !p.swapped;
            }
            LayoutEdit::Condense { regions, on } => {
                let scene = self.published.read().clone();
                for r in &regions {
                    let known = scene
                        .plot(r.plot)
                        .is_some_and(|p| !p.context && r.region < p.regions.len());
                    if !known {
                        return Err(SessionError::Invalid(format!("unknown region {} in plot {}", r.region, r.plot)));
                    }
                }
                if on {
                    view.options.condensed_regions.extend(regions);
                } else {
                    view.options.condensed_regions.retain(|r| !regions.contains(r));
                }
            }
            LayoutEdit::Jitter(m) => {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(SessionError::Invalid(format!("jitter must be >= 0, got {m}")));
                }
                view.options.jitter = m;
            }
            LayoutEdit::TraceMode(mode) => view.options.trace_mode = mode,
            LayoutEdit::Context(on) => view.options.context = on,
            LayoutEdit::Summary(mode) => view.options.summary = mode,
            LayoutEdit::CaseSelection(sel) => {
                if let Some(s) = &sel {
                    if let Some(bad) = s.iter().find(|id| self.dataset.case(**id).is_none()) {
                        return Err(SessionError::Invalid(format!("unknown case {bad}")));
                    }
                }
                view.options.case_selection = sel;
            }
        }
        self.commit(&mut w, view)
    }

    /// Restores the state before the latest edit.
    pub fn undo(&self) -> Result<Arc<SceneGraph>, SessionError> {
        let mut w = self.working.lock();
        let view = w.undo.last().cloned().ok_or(SessionError::NothingToUndo)?;
        let (plan, scene) = render(&self.dataset, &view)?;
        w.undo.pop();
        w.view = view;
        w.plan = plan;
        let scene = Arc::new(scene);
        *self.published.write() = scene.clone();
        Ok(scene)
    }

    pub fn overgeneralization(&self) -> Result<OvergenReport, SessionError> {
        Ok(overgeneralization(&self.tree(), &self.dataset)?)
    }

    pub fn margins(&self, epsilon: Option<f64>) -> Result<MarginReport, SessionError> {
        if let Some(e) = epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return Err(SessionError::Invalid(format!("epsilon must be >= 0, got {e}")));
            }
        }
        Ok(margins(&self.tree(), &self.dataset, epsilon)?)
    }

    /// Compares the working tree on a seeded split of the session dataset.
    pub fn split_compare(&self, train_fraction: f64, seed: u64) -> Result<SplitCompareReport, SessionError> {
        let (train, validation) = self.dataset.split(train_fraction, seed)?;
        Ok(split_compare(&self.tree(), &train, &validation)?)
    }

    pub fn workspace(&self) -> Workspace {
        let w = self.working.lock();
        Workspace {
            dataset_id: self.dataset_id.clone(),
            tree: w.view.tree.clone(),
            placements: w.view.placements.clone(),
            options: w.view.options.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StoreConfig {
    /// Directory searched for `<dataset_id>.csv`.
    pub data_dir: Option<PathBuf>,
}

/// All live sessions.
#[derive(Default)]
pub struct SessionStore {
    config: StoreConfig,
    sessions: RwLock<BTreeMap<SessionId, Arc<Session>>>,
    next: AtomicU64,
}

impl SessionStore {
    pub fn new(config: StoreConfig) -> SessionStore {
        SessionStore {
            config,
            ..Default::default()
        }
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn remove(&self, id: &str) -> Result<(), SessionError> {
        self.sessions
            .write()
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn load_dataset(&self, req: &CreateSession) -> Result<Dataset, SessionError> {
        let mut options = LoadOptions::default();
        if let Some(l) = &req.label_column {
            options.label_column = l.clone();
        }
        if let Some(m) = &req.missing_token {
            options.missing_token = m.clone();
        }
        let builtin = |id: &str| match id {
            "iris" => Some(fixtures::IRIS_CSV),
            "wine" => Some(fixtures::WINE_CSV),
            "wbc" => Some(fixtures::WBC_CSV),
            _ => None,
        };
        let text = match (&req.dataset_id, &req.csv) {
            (Some(_), Some(_)) => return Err(SessionError::Invalid("give either dataset_id or csv, not both".into())),
            (None, None) => return Err(SessionError::Invalid("dataset_id or csv is required".into())),
            (None, Some(csv)) => csv.clone(),
            (Some(id), None) => {
                if id == "wbc" {
                    options.declared_ranges = fixtures::wbc_options().declared_ranges;
                }
                match builtin(id) {
                    Some(t) => t.to_string(),
                    None => {
                        let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                        let path = self
                            .config
                            .data_dir
                            .as_ref()
                            .filter(|_| valid)
                            .map(|d| d.join(format!("{id}.csv")))
                            .ok_or_else(|| SessionError::UnknownDataset(id.clone()))?;
                        std::fs::read_to_string(&path).map_err(|_| SessionError::UnknownDataset(id.clone()))?
                    }
                }
            }
        };
        for (attr, [lo, hi]) in &req.declared_ranges {
            options = options.with_range(attr, *lo, *hi);
        }
        Ok(load_csv(text.as_bytes(), &options)?)
    }

    pub fn create(&self, req: CreateSession) -> Result<Arc<Session>, SessionError> {
        let dataset = self.load_dataset(&req)?;
        let tree = match (&req.tree_json, &req.tree_text, &req.induce_params) {
            (Some(json), None, None) => {
                serde_json::from_value(json.clone()).map_err(|e| SessionError::Tree(TreeError::Json(e.to_string())))?
            }
            (None, Some(text), None) => DecisionTree::parse_text(text)?,
            (None, None, Some(params)) => induce_id3(&dataset, *params),
            _ => {
                return Err(SessionError::Invalid(
                    "exactly one of tree_json, tree_text or induce_params is required".into(),
                ))
            }
        };
        tree.bind(&dataset)?;
        let placements = match req.placements {
            Some(p) => p,
            None => default_placement(&derive_plot_units(&tree, &dataset)?),
        };
        let view = ViewState {
            tree,
            placements,
            options: req.options.unwrap_or_default(),
        };
        let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        let session = Arc::new(Session::new(id.clone(), req.dataset_id.clone(), dataset, view)?);
        self.sessions.write().insert(id, session.clone());
        tracing::info!(session = %session.id, "session created");
        Ok(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iris_session() -> (SessionStore, Arc<Session>) {
        let store = SessionStore::default();
        let s = store
            .create(CreateSession {
                dataset_id: Some("iris".into()),
                tree_text: Some(fixtures::IRIS_TREE.into()),
                ..Default::default()
            })
            .unwrap();
        (store, s)
    }

    #[test]
    fn ids_are_sequential() {
        let (store, s) = iris_session();
        assert_eq!(s.id, "s1");
        let again = store
            .create(CreateSession {
                dataset_id: Some("wine".into()),
                tree_text: Some(fixtures::WINE_TREE.into()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(again.id, "s2");
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn failed_edit_keeps_state() {
        let (_, s) = iris_session();
        let before = s.scene();
        let leaf = s.tree().leaf_ids().next().unwrap();
        assert!(matches!(s.adjust_threshold(leaf, 1.0), Err(SessionError::Tree(TreeError::NotASplit(_)))));
        assert!(matches!(s.adjust_threshold(99, 1.0), Err(SessionError::UnknownNode(99))));
        assert!(matches!(s.edit_layout(LayoutEdit::Swap { plot: 9 }), Err(SessionError::Invalid(_))));
        assert!(matches!(s.edit_layout(LayoutEdit::Jitter(-1.0)), Err(SessionError::Invalid(_))));
        assert_eq!(*s.scene(), *before);
        assert_eq!(s.undo_depth(), 0);
        assert!(matches!(s.undo(), Err(SessionError::NothingToUndo)));
    }

    #[test]
    fn request_must_name_one_source() {
        let store = SessionStore::default();
        let both = CreateSession {
            dataset_id: Some("iris".into()),
            csv: Some("x,class\n1,A\n".into()),
            tree_text: Some(fixtures::IRIS_TREE.into()),
            ..Default::default()
        };
        assert!(matches!(store.create(both), Err(SessionError::Invalid(_))));
        let none = CreateSession {
            dataset_id: Some("iris".into()),
            ..Default::default()
        };
        assert!(matches!(store.create(none), Err(SessionError::Invalid(_))));
        let traversal = CreateSession {
            dataset_id: Some("../etc/passwd".into()),
            tree_text: Some(fixtures::IRIS_TREE.into()),
            ..Default::default()
        };
        assert!(matches!(store.create(traversal), Err(SessionError::UnknownDataset(_))));
        assert!(store.is_empty());
    }
}
