//! Binary threshold decision trees.
//!
//! Nodes live in an arena indexed by their preorder position; the root is node 0.
//! A split sends a value `< threshold` to its low child and `>= threshold` to its
//! high child. Missing values follow the child that received more cases
//! according to the leaf counts (low child on ties or when counts are all zero).

mod eval;
mod induce;
mod json;
mod text;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Case, Dataset};

pub use eval::{evaluate, ClassStats, EvaluationReport};
pub use induce::{induce_id3, majority, InduceParams, GAIN_TIE_EPSILON};
pub use json::{JsonNode, NodeKind};
pub use text::ParseError;

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("tree json: {0}")]
    Json(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is a leaf, not a split")]
    NotASplit(NodeId),
    #[error("threshold must be finite, got {0}")]
    BadThreshold(f64),
    #[error("tree attribute '{0}' is not in the dataset")]
    UnknownAttribute(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub attribute: String,
    pub threshold: f64,
    pub low: NodeId,
    pub high: NodeId,
}

impl SplitNode {
    pub fn child(&self, branch: Branch) -> NodeId {
        match branch {
            Branch::Low => self.low,
            Branch::High => self.high,
        }
    }

    pub fn branch_of(&self, value: f64) -> Branch {
        if value < self.threshold {
            Branch::Low
        } else {
            Branch::High
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafNode {
    pub class: String,
    pub purity_pct: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split(SplitNode),
    Leaf(LeafNode),
}

impl Node {
    pub fn as_split(&self) -> Option<&SplitNode> {
        match self {
            Node::Split(s) => Some(s),
            Node::Leaf(_) => None,
        }
    }

    pub fn as_leaf(&self) -> Option<&LeafNode> {
        match self {
            Node::Leaf(l) => Some(l),
            Node::Split(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

/// One split visited on the way to a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step {
    pub node: NodeId,
    pub branch: Branch,
    /// The case had no value for the split attribute.
    pub imputed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub class: String,
    pub leaf: NodeId,
    pub path: Vec<Step>,
}

impl DecisionTree {
    /// Builds a tree from an arena whose order must be preorder with the root first.
    pub(crate) fn from_preorder(nodes: Vec<Node>) -> DecisionTree {
        debug_assert!(!nodes.is_empty());
        DecisionTree { nodes }
    }

    pub fn leaf(class: &str, purity_pct: f64, count: u64) -> DecisionTree {
        DecisionTree {
            nodes: vec![Node::Leaf(LeafNode {
                class: class.to_string(),
                purity_pct,
                count,
            })],
        }
    }

    /// Parses the indented listing format (`attr < t` / `attr >= t`, leaves
    /// ending in `then class = NAME (P % of N examples)`).
    pub fn parse_text(text: &str) -> Result<DecisionTree, TreeError> {
        Ok(text::parse(text)?)
    }

    /// Prints the listing format; `parse_text(print_text())` yields the same tree.
    pub fn to_text(&self) -> String {
        text::print(self)
    }

    pub fn to_json(&self) -> String {
        json::to_json(self)
    }

    pub fn from_json(s: &str) -> Result<DecisionTree, TreeError> {
        json::from_json(s)
    }

    pub const ROOT: NodeId = 0;

    pub fn root(&self) -> NodeId {
        Self::ROOT
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn split(&self, id: NodeId) -> Option<&SplitNode> {
        self.nodes.get(id).and_then(Node::as_split)
    }

    pub fn leaf_node(&self, id: NodeId) -> Option<&LeafNode> {
        self.nodes.get(id).and_then(Node::as_leaf)
    }

    pub fn is_leaf_only(&self) -> bool {
        matches!(self.nodes[0], Node::Leaf(_))
    }

    pub fn split_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| matches!(self.nodes[i], Node::Split(_)))
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| matches!(self.nodes[i], Node::Leaf(_)))
    }

    pub fn split_count(&self) -> usize {
        self.split_ids().count()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_ids().count()
    }

    /// Attributes used by splits, in preorder of first use.
    pub fn attributes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in self.nodes.iter().filter_map(Node::as_split) {
            if !out.contains(&s.attribute) {
                out.push(s.attribute.clone());
            }
        }
        out
    }

    /// Leaf classes in preorder of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.nodes.iter().filter_map(Node::as_leaf) {
            if !out.contains(&l.class) {
                out.push(l.class.clone());
            }
        }
        out
    }

    /// Parent of every node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<(NodeId, Branch)>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Split(s) = node {
                parents[s.low] = Some((id, Branch::Low));
                parents[s.high] = Some((id, Branch::High));
            }
        }
        parents
    }

    /// Conditions from the root down to `node`.
    pub fn path_to(&self, node: NodeId) -> Vec<(NodeId, Branch)> {
        let parents = self.parents();
        let mut path = Vec::new();
        let mut cur = node;
        while let Some((p, b)) = parents[cur] {
            path.push((p, b));
            cur = p;
        }
        path.reverse();
        path
    }

    /// Sum of leaf counts under each node.
    pub fn subtree_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.nodes.len()];
        // children have larger preorder ids than their parent
        for id in (0..self.nodes.len()).rev() {
            counts[id] = match &self.nodes[id] {
                Node::Leaf(l) => l.count,
                Node::Split(s) => counts[s.low] + counts[s.high],
            };
        }
        counts
    }

    /// Child followed by a case whose value for the split attribute is missing.
    pub fn missing_branches(&self) -> Vec<Branch> {
        let counts = self.subtree_counts();
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Split(s) if counts[s.high] > counts[s.low] => Branch::High,
                _ => Branch::Low,
            })
            .collect()
    }

    /// Resolves attribute names against a dataset schema.
    pub fn bind<'t>(&'t self, dataset: &Dataset) -> Result<Classifier<'t>, TreeError> {
        let attr_index = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Split(s) => dataset
                    .attribute_index(&s.attribute)
                    .ok_or_else(|| TreeError::UnknownAttribute(s.attribute.clone())),
                Node::Leaf(_) => Ok(usize::MAX),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Classifier {
            tree: self,
            attr_index,
            missing: self.missing_branches(),
        })
    }

    /// Copy of the tree with one split threshold replaced. Leaf statistics are
    /// left as they were until [`DecisionTree::refresh_leaf_stats`].
    pub fn adjust_threshold(&self, node: NodeId, threshold: f64) -> Result<DecisionTree, TreeError> {
        if !threshold.is_finite() {
            return Err(TreeError::BadThreshold(threshold));
        }
        let mut out = self.clone();
        match out.nodes.get_mut(node) {
            None => Err(TreeError::UnknownNode(node)),
            Some(Node::Leaf(_)) => Err(TreeError::NotASplit(node)),
            Some(Node::Split(s)) => {
                s.threshold = threshold;
                Ok(out)
            }
        }
    }

    /// Recomputes every leaf's count and majority purity from `dataset`.
    /// Leaf classes are kept. Empty leaves get purity 100.
    pub fn refresh_leaf_stats(&self, dataset: &Dataset) -> Result<DecisionTree, TreeError> {
        let classifier = self.bind(dataset)?;
        let mut per_leaf: HashMap<NodeId, HashMap<&str, u64>> = HashMap::new();
        for case in &dataset.cases {
            let leaf = classifier.leaf_of(case);
            *per_leaf
                .entry(leaf)
                .or_default()
                .entry(case.label.as_str())
                .or_default() += 1;
        }
        let mut out = self.clone();
        for (id, node) in out.nodes.iter_mut().enumerate() {
            if let Node::Leaf(l) = node {
                let (count, majority) = per_leaf
                    .get(&id)
                    .map(|m| (m.values().sum::<u64>(), m.values().copied().max().unwrap_or(0)))
                    .unwrap_or((0, 0));
                l.count = count;
                l.purity_pct = if count == 0 {
                    100.0
                } else {
                    100.0 * majority as f64 / count as f64
                };
            }
        }
        Ok(out)
    }

    /// Renames a leaf class everywhere it occurs.
    pub fn rename_class(&self, from: &str, to: &str) -> DecisionTree {
        let mut out = self.clone();
        for node in &mut out.nodes {
            if let Node::Leaf(l) = node {
                if l.class == from {
                    l.class = to.to_string();
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, id: NodeId) -> usize {
            match &t.nodes[id] {
                Node::Leaf(_) => 0,
                Node::Split(s) => 1 + go(t, s.low).max(go(t, s.high)),
            }
        }
        go(self, 0)
    }
}

/// A tree bound to a dataset schema; predicts cases of that schema.
#[derive(Debug, Clone)]
pub struct Classifier<'t> {
    tree: &'t DecisionTree,
    attr_index: Vec<usize>,
    missing: Vec<Branch>,
}

impl<'t> Classifier<'t> {
    pub fn tree(&self) -> &'t DecisionTree {
        self.tree
    }

    /// Dataset column of the split at `node`.
    pub fn attribute_column(&self, node: NodeId) -> Option<usize> {
        self.tree.split(node).map(|_| self.attr_index[node])
    }

    /// Branch taken at a split for the given case.
    pub fn branch(&self, node: NodeId, case: &Case) -> (Branch, bool) {
        let s = self.tree.split(node).expect("branch() on a split node");
        match case.value(self.attr_index[node]) {
            Some(v) => (s.branch_of(v), false),
            None => (self.missing[node], true),
        }
    }

    pub fn missing_branch(&self, node: NodeId) -> Branch {
        self.missing[node]
    }

    pub fn leaf_of(&self, case: &Case) -> NodeId {
        let mut cur = 0;
        while let Some(s) = self.tree.split(cur) {
            cur = s.child(self.branch(cur, case).0);
        }
        cur
    }

    pub fn predict(&self, case: &Case) -> Prediction {
        let mut cur = 0;
        let mut path = Vec::new();
        while let Some(s) = self.tree.split(cur) {
            let (branch, imputed) = self.branch(cur, case);
            path.push(Step {
                node: cur,
                branch,
                imputed,
            });
            cur = s.child(branch);
        }
        Prediction {
            class: self.tree.leaf_node(cur).expect("walk ends at a leaf").class.clone(),
            leaf: cur,
            path,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv, LoadOptions};

    fn stump() -> DecisionTree {
        DecisionTree::parse_text(
            "a < 2.5 then class = A (100.00 % of 3 cases)\n\
             a >= 2.5 then class = B (100.00 % of 1 cases)\n",
        )
        .unwrap()
    }

    #[test]
    fn equality_goes_high() {
        let ds = load_csv("a,class\n2.5,B\n".as_bytes(), &LoadOptions::default()).unwrap();
        let t = stump();
        let p = t.bind(&ds).unwrap().predict(&ds.cases[0]);
        assert_eq!(p.class, "B");
        assert_eq!(p.path, vec![Step { node: 0, branch: Branch::High, imputed: false }]);
    }

    #[test]
    fn missing_follows_heavier_child() {
        let ds = load_csv("a,class\n?,A\n".as_bytes(), &LoadOptions::default()).unwrap();
        let t = stump();
        let c = t.bind(&ds).unwrap();
        assert_eq!(c.predict(&ds.cases[0]).class, "A");
        let heavier_high = DecisionTree::parse_text(
            "a < 2.5 then class = A (100.00 % of 1 cases)\n\
             a >= 2.5 then class = B (100.00 % of 9 cases)\n",
        )
        .unwrap();
        let p = heavier_high.bind(&ds).unwrap().predict(&ds.cases[0]);
        assert_eq!(p.class, "B");
        assert!(p.path[0].imputed);
    }

    #[test]
    fn missing_defaults_low_without_counts() {
        let t = stump().refresh_leaf_stats(&load_csv("a,class\n".as_bytes(), &LoadOptions::default()).unwrap());
        let t = t.unwrap();
        assert_eq!(t.missing_branches()[0], Branch::Low);
        assert!(t.leaf_ids().all(|l| {
            let l = t.leaf_node(l).unwrap();
            l.count == 0 && l.purity_pct == 100.0
        }));
    }

    #[test]
    fn adjust_threshold_errors() {
        let t = stump();
        assert_eq!(t.adjust_threshold(1, 3.0).unwrap_err(), TreeError::NotASplit(1));
        assert_eq!(t.adjust_threshold(9, 3.0).unwrap_err(), TreeError::UnknownNode(9));
        assert!(matches!(t.adjust_threshold(0, f64::NAN), Err(TreeError::BadThreshold(_))));
        let moved = t.adjust_threshold(0, 3.0).unwrap();
        assert_eq!(moved.split(0).unwrap().threshold, 3.0);
        assert_eq!(t.split(0).unwrap().threshold, 2.5);
    }

    #[test]
    fn bind_rejects_unknown_attribute() {
        let ds = load_csv("b,class\n1,A\n".as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(stump().bind(&ds).unwrap_err(), TreeError::UnknownAttribute("a".into()));
    }
}
