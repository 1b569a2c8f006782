//! Canonical nested JSON form of a tree.

use serde::{Deserialize, Serialize};

use super::{DecisionTree, LeafNode, Node, SplitNode, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Split,
    Leaf,
}

/// Wire form of one node; children are nested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<usize>,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<Box<JsonNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<Box<JsonNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl JsonNode {
    pub fn from_tree(tree: &DecisionTree) -> JsonNode {
        fn go(tree: &DecisionTree, id: usize) -> JsonNode {
            match &tree.nodes()[id] {
                Node::Split(s) => JsonNode {
                    node_id: Some(id),
                    kind: NodeKind::Split,
                    attribute: Some(s.attribute.clone()),
                    threshold: Some(s.threshold),
                    low: Some(Box::new(go(tree, s.low))),
                    high: Some(Box::new(go(tree, s.high))),
                    class: None,
                    purity_pct: None,
                    count: None,
                },
                Node::Leaf(l) => JsonNode {
                    node_id: Some(id),
                    kind: NodeKind::Leaf,
                    attribute: None,
                    threshold: None,
                    low: None,
                    high: None,
                    class: Some(l.class.clone()),
                    purity_pct: Some(l.purity_pct),
                    count: Some(l.count),
                },
            }
        }
        go(tree, 0)
    }

    /// Validates the schema and flattens to preorder. `node_id`s may be omitted;
    /// when present they must equal the node's preorder position.
    pub fn into_tree(self) -> Result<DecisionTree, TreeError> {
        fn bad(msg: String) -> TreeError {
            TreeError::Json(msg)
        }
        fn go(n: JsonNode, nodes: &mut Vec<Node>) -> Result<usize, TreeError> {
            let id = nodes.len();
            if let Some(given) = n.node_id {
                if given != id {
                    return Err(bad(format!(
                        "node_id {given} does not match preorder position {id}"
                    )));
                }
            }
            match n.kind {
                NodeKind::Leaf => {
                    if n.attribute.is_some() || n.threshold.is_some() || n.low.is_some() || n.high.is_some() {
                        return Err(bad(format!("leaf {id} carries split fields")));
                    }
                    let class = n.class.ok_or_else(|| bad(format!("leaf {id} has no class")))?;
                    let purity_pct = n.purity_pct.unwrap_or(100.0);
                    if !(0.0..=100.0).contains(&purity_pct) {
                        return Err(bad(format!("leaf {id} purity {purity_pct} outside [0, 100]")));
                    }
                    nodes.push(Node::Leaf(LeafNode {
                        class,
                        purity_pct,
                        count: n.count.unwrap_or(0),
                    }));
                }
                NodeKind::Split => {
                    if n.class.is_some() || n.purity_pct.is_some() || n.count.is_some() {
                        return Err(bad(format!("split {id} carries leaf fields")));
                    }
                    let attribute = n
                        .attribute
                        .ok_or_else(|| bad(format!("split {id} has no attribute")))?;
                    let threshold = n
                        .threshold
                        .ok_or_else(|| bad(format!("split {id} has no threshold")))?;
                    let (low, high) = match (n.low, n.high) {
                        (Some(l), Some(h)) => (l, h),
                        _ => return Err(bad(format!("split {id} needs both children"))),
                    };
                    nodes.push(Node::Split(SplitNode {
                        attribute,
                        threshold,
                        low: 0,
                        high: 0,
                    }));
                    let low_id = go(*low, nodes)?;
                    let high_id = go(*high, nodes)?;
                    if let Node::Split(s) = &mut nodes[id] {
                        s.low = low_id;
                        s.high = high_id;
                    }
                }
            }
            Ok(id)
        }
        let mut nodes = Vec::new();
        go(self, &mut nodes)?;
        Ok(DecisionTree::from_preorder(nodes))
    }
}

pub(super) fn to_json(tree: &DecisionTree) -> String {
    serde_json::to_string_pretty(&JsonNode::from_tree(tree)).expect("tree serializes")
}

pub(super) fn from_json(s: &str) -> Result<DecisionTree, TreeError> {
    let node: JsonNode = serde_json::from_str(s).map_err(|e| TreeError::Json(e.to_string()))?;
    node.into_tree()
}

impl Serialize for DecisionTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        JsonNode::from_tree(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DecisionTree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        JsonNode::deserialize(deserializer)?
            .into_tree()
            .map_err(serde::de::Error::custom)
    }
}
