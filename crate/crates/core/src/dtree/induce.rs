//! Entropy-driven binary tree induction over numeric midpoint thresholds.

use serde::{Deserialize, Serialize};

use super::{DecisionTree, LeafNode, Node, SplitNode};
use crate::dataset::{Case, Dataset};

/// Gains closer than this are ties; ties keep the earlier attribute, then the
/// smaller threshold.
pub const GAIN_TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InduceParams {
    /// Minimum number of cases (with a known value) on each side of a split.
    pub min_leaf: usize,
    /// Splits are only made at depth < max_depth (root depth 0).
    pub max_depth: usize,
    /// A split needs at least this gain (and always a positive one).
    pub min_gain: f64,
}

impl Default for InduceParams {
    fn default() -> Self {
        InduceParams {
            min_leaf: 2,
            max_depth: 8,
            min_gain: 0.0,
        }
    }
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Index of the majority class in `counts`; ties go to the lower index.
pub fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    attr: usize,
    threshold: f64,
    gain: f64,
}

struct Inducer<'a> {
    dataset: &'a Dataset,
    params: InduceParams,
    nodes: Vec<Node>,
}

impl Inducer<'_> {
    fn class_counts(&self, cases: &[&Case]) -> Vec<usize> {
        let mut counts = vec![0; self.dataset.classes.len()];
        for c in cases {
            counts[self.dataset.class_index(&c.label).expect("label in class list")] += 1;
        }
        counts
    }

    /// Best (attribute, midpoint) by information gain over the cases with a
    /// known value, scaled by the known fraction.
    fn best_split(&self, cases: &[&Case]) -> Option<Candidate> {
        let k = self.dataset.classes.len();
        let n = cases.len() as f64;
        let mut best: Option<Candidate> = None;
        for attr in 0..self.dataset.attributes.len() {
            let mut known: Vec<(f64, usize)> = cases
                .iter()
                .filter_map(|c| {
                    c.value(attr)
                        .map(|v| (v, self.dataset.class_index(&c.label).unwrap()))
                })
                .collect();
            if known.len() < 2 {
                continue;
            }
            known.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut total = vec![0usize; k];
            for &(_, c) in &known {
                total[c] += 1;
            }
            let base = entropy(&total);
            let m = known.len();
            let known_frac = m as f64 / n;
            let mut left = vec![0usize; k];
            for i in 0..m - 1 {
                left[known[i].1] += 1;
                if known[i].0 == known[i + 1].0 {
                    continue;
                }
                let n_left = i + 1;
                let n_right = m - n_left;
                if n_left < self.params.min_leaf || n_right < self.params.min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let cond = (n_left as f64 * entropy(&left) + n_right as f64 * entropy(&right))
                    / m as f64;
                let gain = known_frac * (base - cond);
                let threshold = (known[i].0 + known[i + 1].0) / 2.0;
                if best.is_none_or(|b| gain > b.gain + GAIN_TIE_EPSILON) {
                    best = Some(Candidate {
                        attr,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn push_leaf(&mut self, counts: &[usize]) -> usize {
        let n: usize = counts.iter().sum();
        let m = majority(counts);
        self.nodes.push(Node::Leaf(LeafNode {
            class: self.dataset.classes[m].clone(),
            purity_pct: if n == 0 {
                100.0
            } else {
                100.0 * counts[m] as f64 / n as f64
            },
            count: n as u64,
        }));
        self.nodes.len() - 1
    }

    fn grow(&mut self, cases: Vec<&Case>, depth: usize) -> usize {
        let counts = self.class_counts(&cases);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || cases.len() < 2 * self.params.min_leaf.max(1) {
            return self.push_leaf(&counts);
        }
        let Some(best) = self.best_split(&cases) else {
            return self.push_leaf(&counts);
        };
        if best.gain <= GAIN_TIE_EPSILON || best.gain < self.params.min_gain {
            return self.push_leaf(&counts);
        }

        let (mut low, mut high, mut missing) = (Vec::new(), Vec::new(), Vec::new());
        for c in cases {
            match c.value(best.attr) {
                Some(v) if v < best.threshold => low.push(c),
                Some(_) => high.push(c),
                None => missing.push(c),
            }
        }
        // same rule prediction uses: the heavier child, low on ties
        if high.len() > low.len() {
            high.extend(missing);
        } else {
            low.extend(missing);
        }

        let id = self.nodes.len();
        self.nodes.push(Node::Split(SplitNode {
            attribute: self.dataset.attributes[best.attr].name.clone(),
            threshold: best.threshold,
            low: 0,
            high: 0,
        }));
        let low_id = self.grow(low, depth + 1);
        let high_id = self.grow(high, depth + 1);
        if let Node::Split(s) = &mut self.nodes[id] {
            s.low = low_id;
            s.high = high_id;
        }
        id
    }
}

/// Grows a tree on `train`. Leaves carry the majority class (ties to the class
/// listed first in the dataset) with their count and purity.
pub fn induce_id3(train: &Dataset, params: InduceParams) -> DecisionTree {
    let mut inducer = Inducer {
        dataset: train,
        params,
        nodes: Vec::new(),
    };
    inducer.grow(train.cases.iter().collect(), 0);
    DecisionTree::from_preorder(inducer.nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv, LoadOptions};

    fn ds(text: &str) -> Dataset {
        load_csv(text.as_bytes(), &LoadOptions::default()).unwrap()
    }

    #[test]
    fn one_dimensional_example() {
        let t = induce_id3(
            &ds("x,class\n1,A\n2,A\n3,B\n4,B\n"),
            InduceParams {
                min_leaf: 1,
                ..Default::default()
            },
        );
        let s = t.split(0).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert_eq!(t.leaf_count(), 2);
        for l in t.leaf_ids() {
            assert_eq!(t.leaf_node(l).unwrap().purity_pct, 100.0);
        }
    }

    #[test]
    fn single_class_is_a_leaf() {
        let t = induce_id3(&ds("x,class\n1,A\n2,A\n"), InduceParams::default());
        assert!(t.is_leaf_only());
        assert_eq!(t.leaf_node(0).unwrap().purity_pct, 100.0);
        assert_eq!(t.leaf_node(0).unwrap().count, 2);
    }

    #[test]
    fn majority_ties_follow_class_order() {
        assert_eq!(majority(&[2, 2, 1]), 0);
        assert_eq!(majority(&[1, 3, 3]), 1);
        let t = induce_id3(
            &ds("x,class\n1,B\n1,A\n"),
            InduceParams::default(),
        );
        assert_eq!(t.leaf_node(0).unwrap().class, "B");
    }

    #[test]
    fn max_depth_zero_gives_leaf() {
        let t = induce_id3(
            &ds("x,class\n1,A\n2,A\n3,B\n4,B\n"),
            InduceParams {
                min_leaf: 1,
                max_depth: 0,
                min_gain: 0.0,
            },
        );
        assert!(t.is_leaf_only());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[2, 2]), 1.0);
        assert_eq!(entropy(&[4, 0]), 0.0);
        assert_eq!(entropy(&[]), 0.0);
    }
}
