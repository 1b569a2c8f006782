//! Audit reports: rule slack against the data, threshold margins and
//! train/validation coverage.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{CaseId, Dataset};
use crate::dtree::{evaluate, Branch, DecisionTree, EvaluationReport, NodeId, TreeError};
use crate::pairing::Bound;

/// Share of an attribute's range used as the default borderline distance.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSlack {
    pub attribute: String,
    /// Rule interval clipped to the attribute range, `[lo, hi]`.
    pub rule_interval: [f64; 2],
    /// Min and max of the covered cases; `None` when no case is covered.
    pub data_interval: Option<[f64; 2]>,
    pub slack_low: f64,
    pub slack_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSlack {
    pub leaf_id: NodeId,
    pub class: String,
    /// Cases of the leaf's class that reach it.
    pub covered: usize,
    pub attributes: Vec<AttributeSlack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvergenReport {
    pub leaves: Vec<LeafSlack>,
}

/// Per-leaf gap between each rule bound and the nearest covered case, for the
/// attributes tested on the leaf's path. A case is covered by a leaf when the
/// tree routes it there and its label is the leaf's class.
pub fn overgeneralization(tree: &DecisionTree, dataset: &Dataset) -> Result<OvergenReport, TreeError> {
    let classifier = tree.bind(dataset)?;
    let mut reached: BTreeMap<NodeId, Vec<CaseId>> = BTreeMap::new();
    for (i, case) in dataset.cases.iter().enumerate() {
        reached.entry(classifier.leaf_of(case)).or_default().push(i);
    }

    let mut leaves = Vec::new();
    for leaf_id in tree.leaf_ids() {
        let leaf = tree.leaf_node(leaf_id).expect("leaf id");
        let covered: Vec<usize> = reached
            .get(&leaf_id)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&i| dataset.cases[i].label == leaf.class)
            .collect();

        let mut rules: Vec<(String, Bound)> = Vec::new();
        for (node, branch) in tree.path_to(leaf_id) {
            let s = tree.split(node).expect("path runs through splits");
            match rules.iter_mut().find(|(a, _)| *a == s.attribute) {
                Some((_, b)) => *b = b.narrow(branch, s.threshold),
                None => rules.push((s.attribute.clone(), Bound::ALL.narrow(branch, s.threshold))),
            }
        }

        let attributes = rules
            .into_iter()
            .map(|(attribute, bound)| {
                let col = dataset.attribute_index(&attribute).expect("bound tree");
                let range = dataset.attributes[col].range();
                let (lo, hi) = bound.clip(range);
                let hi = hi.max(lo);
                let values = covered
                    .iter()
                    .filter_map(|&i| dataset.cases[i].value(col))
                    .map(|v| v.clamp(lo, hi));
                let data = values.fold(None, |acc: Option<[f64; 2]>, v| {
                    Some(acc.map_or([v, v], |[a, b]| [a.min(v), b.max(v)]))
                });
                let (slack_low, slack_high) = match data {
                    Some([a, b]) => (a - lo, hi - b),
                    None => (hi - lo, hi - lo),
                };
                AttributeSlack {
                    attribute,
                    rule_interval: [lo, hi],
                    data_interval: data,
                    slack_low,
                    slack_high,
                }
            })
            .collect();
        leaves.push(LeafSlack {
            leaf_id,
            class: leaf.class.clone(),
            covered: covered.len(),
            attributes,
        });
    }
    Ok(OvergenReport { leaves })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Borderline {
    pub case_id: CaseId,
    pub value: f64,
    pub distance: f64,
    pub side: Side,
    /// Label differs from the majority label on its side.
    pub opposite_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMargin {
    pub node_id: NodeId,
    pub attribute: String,
    pub threshold: f64,
    pub epsilon: f64,
    pub reaching: usize,
    pub nearest_low: Option<f64>,
    pub nearest_high: Option<f64>,
    pub borderline: Vec<Borderline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub nodes: Vec<NodeMargin>,
}

/// For every split, the closest known values on each side of the threshold
/// among the cases reaching it, and the cases within `epsilon` of it.
/// `epsilon = None` uses 1% of each attribute's range.
pub fn margins(tree: &DecisionTree, dataset: &Dataset, epsilon: Option<f64>) -> Result<MarginReport, TreeError> {
    let classifier = tree.bind(dataset)?;
    let mut reaching: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, case) in dataset.cases.iter().enumerate() {
        let p = classifier.predict(case);
        for step in &p.path {
            reaching.entry(step.node).or_default().push(i);
        }
    }

    let mut nodes = Vec::new();
    for node_id in tree.split_ids() {
        let s = tree.split(node_id).expect("split id");
        let col = classifier.attribute_column(node_id).expect("bound split");
        let eps = epsilon.unwrap_or_else(|| DEFAULT_EPSILON_FRACTION * dataset.attributes[col].range().width());
        let cases: Vec<(usize, f64)> = reaching
            .get(&node_id)
            .into_iter()
            .flatten()
            .filter_map(|&i| dataset.cases[i].value(col).map(|v| (i, v)))
            .collect();

        let side_of = |v: f64| match s.branch_of(v) {
            Branch::Low => Side::Low,
            Branch::High => Side::High,
        };
        let mut majority: BTreeMap<(Side, &str), usize> = BTreeMap::new();
        for &(i, v) in &cases {
            *majority.entry((side_of(v), dataset.cases[i].label.as_str())).or_default() += 1;
        }
        let majority_label = |side: Side| -> Option<&str> {
            let mut best: Option<(&str, usize)> = None;
            for c in &dataset.classes {
                let n = majority.get(&(side, c.as_str())).copied().unwrap_or(0);
                if n > 0 && best.is_none_or(|(_, m)| n > m) {
                    best = Some((c.as_str(), n));
                }
            }
            best.map(|b| b.0)
        };
        let (maj_low, maj_high) = (majority_label(Side::Low), majority_label(Side::High));

        let nearest_low = cases
            .iter()
            .map(|c| c.1)
            .filter(|&v| v < s.threshold)
            .max_by(f64::total_cmp);
        let nearest_high = cases
            .iter()
            .map(|c| c.1)
            .filter(|&v| v >= s.threshold)
            .min_by(f64::total_cmp);
        let mut borderline: Vec<Borderline> = cases
            .iter()
            .filter_map(|&(i, v)| {
                let distance = (v - s.threshold).abs();
                // ε = 0 means no borderline band at all
                (eps > 0.0 && distance <= eps).then(|| {
                    let side = side_of(v);
                    let maj = if side == Side::Low { maj_low } else { maj_high };
                    Borderline {
                        case_id: dataset.cases[i].id,
                        value: v,
                        distance,
                        side,
                        opposite_class: maj.is_some_and(|m| m != dataset.cases[i].label),
                    }
                })
            })
            .collect();
        borderline.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.case_id.cmp(&b.case_id)));
        nodes.push(NodeMargin {
            node_id,
            attribute: s.attribute.clone(),
            threshold: s.threshold,
            epsilon: eps,
            reaching: cases.len(),
            nearest_low,
            nearest_high,
            borderline,
        });
    }
    Ok(MarginReport { nodes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafCoverage {
    pub leaf_id: NodeId,
    pub class: String,
    pub train_count: usize,
    pub validation_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCompareReport {
    pub train_eval: EvaluationReport,
    pub validation_eval: EvaluationReport,
    /// One row per leaf, i.e. per terminal region.
    pub regions: Vec<LeafCoverage>,
    pub train_only: Vec<NodeId>,
    pub validation_only: Vec<NodeId>,
}

pub fn split_compare(tree: &DecisionTree, train: &Dataset, validation: &Dataset) -> Result<SplitCompareReport, TreeError> {
    let count = |ds: &Dataset| -> Result<BTreeMap<NodeId, usize>, TreeError> {
        let classifier = tree.bind(ds)?;
        let mut m = BTreeMap::new();
        for case in &ds.cases {
            *m.entry(classifier.leaf_of(case)).or_insert(0) += 1;
        }
        Ok(m)
    };
    let (tc, vc) = (count(train)?, count(validation)?);
    let regions: Vec<LeafCoverage> = tree
        .leaf_ids()
        .map(|leaf_id| LeafCoverage {
            leaf_id,
            class: tree.leaf_node(leaf_id).expect("leaf id").class.clone(),
            train_count: tc.get(&leaf_id).copied().unwrap_or(0),
            validation_count: vc.get(&leaf_id).copied().unwrap_or(0),
        })
        .collect();
    Ok(SplitCompareReport {
        train_eval: evaluate(tree, train)?,
        validation_eval: evaluate(tree, validation)?,
        train_only: regions
            .iter()
            .filter(|r| r.train_count > 0 && r.validation_count == 0)
            .map(|r| r.leaf_id)
            .collect(),
        validation_only: regions
            .iter()
            .filter(|r| r.validation_count > 0 && r.train_count == 0)
            .map(|r| r.leaf_id)
            .collect(),
        regions,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

impl OvergenReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:>4}  {:<16}  {:>7}  {:<20}  {:>19}  {:>19}  {:>10}  {:>10}",
            "Leaf", "Class", "Covered", "Attribute", "Rule interval", "Data interval", "Slack low", "Slack high"
        )
        .unwrap();
        for leaf in &self.leaves {
            for a in &leaf.attributes {
                let data = a
                    .data_interval
                    .map_or("-".to_string(), |[l, h]| format!("[{l:.4}, {h:.4}]"));
                writeln!(
                    out,
                    "{:>4}  {:<16}  {:>7}  {:<20}  {:>19}  {:>19}  {:>10.4}  {:>10.4}",
                    leaf.leaf_id,
                    leaf.class,
                    leaf.covered,
                    a.attribute,
                    format!("[{:.4}, {:.4}]", a.rule_interval[0], a.rule_interval[1]),
                    data,
                    a.slack_low,
                    a.slack_high
                )
                .unwrap();
            }
        }
        out
    }
}

impl MarginReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:>4}  {:<20}  {:>10}  {:>10}  {:>10}  {:>8}  {:>10}  {:>8}",
            "Node", "Attribute", "Threshold", "Nearest <", "Nearest >=", "Epsilon", "Borderline", "Opposite"
        )
        .unwrap();
        for n in &self.nodes {
            writeln!(
                out,
                "{:>4}  {:<20}  {:>10.4}  {:>10}  {:>10}  {:>8.4}  {:>10}  {:>8}",
                n.node_id,
                n.attribute,
                n.threshold,
                opt(n.nearest_low),
                opt(n.nearest_high),
                n.epsilon,
                n.borderline.len(),
                n.borderline.iter().filter(|b| b.opposite_class).count()
            )
            .unwrap();
        }
        out
    }
}

impl SplitCompareReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "Training").unwrap();
        out.push_str(&self.train_eval.to_table());
        writeln!(out, "\nValidation").unwrap();
        out.push_str(&self.validation_eval.to_table());
        writeln!(out, "\n{:>4}  {:<16}  {:>8}  {:>10}", "Leaf", "Class", "Training", "Validation").unwrap();
        for r in &self.regions {
            writeln!(
                out,
                "{:>4}  {:<16}  {:>8}  {:>10}",
                r.leaf_id, r.class, r.train_count, r.validation_count
            )
            .unwrap();
        }
        writeln!(out, "Training only: {:?}", self.train_only).unwrap();
        writeln!(out, "Validation only: {:?}", self.validation_only).unwrap();
        out
    }
}
