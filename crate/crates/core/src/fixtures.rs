//! Bundled datasets and the published example trees.
//!
//! WBC attributes are integers on a 1 to 10 scale, so that range is declared
//! for every WBC attribute instead of using the observed one.

use crate::dataset::{load_csv, Dataset, LoadOptions};
use crate::dtree::DecisionTree;

pub const IRIS_CSV: &str = include_str!("../data/iris.csv");
pub const WINE_CSV: &str = include_str!("../data/wine.csv");
pub const WBC_CSV: &str = include_str!("../data/wbc.csv");

/// WBC stump-and-subtree example (plot pairing walkthrough).
pub const WBC_SMALL_TREE: &str = include_str!("../data/trees/wbc_small.txt");
/// Full WBC tree; its benign leaves are spelled "begin".
pub const WBC_TREE: &str = include_str!("../data/trees/wbc.txt");
pub const IRIS_TREE: &str = include_str!("../data/trees/iris.txt");
pub const WINE_TREE: &str = include_str!("../data/trees/wine.txt");
/// WBC tree grown on a 90% training split.
pub const WBC_SPLIT_TREE: &str = include_str!("../data/trees/wbc_split.txt");

pub const WBC_SCALE: (f64, f64) = (1.0, 10.0);

pub fn wbc_options() -> LoadOptions {
    let header = WBC_CSV.lines().next().unwrap_or_default();
    header
        .split(',')
        .filter(|c| *c != "class")
        .fold(LoadOptions::default(), |o, c| o.with_range(c, WBC_SCALE.0, WBC_SCALE.1))
}

pub fn iris() -> Dataset {
    load_csv(IRIS_CSV.as_bytes(), &LoadOptions::default()).expect("bundled iris parses")
}

pub fn wine() -> Dataset {
    load_csv(WINE_CSV.as_bytes(), &LoadOptions::default()).expect("bundled wine parses")
}

pub fn wbc() -> Dataset {
    load_csv(WBC_CSV.as_bytes(), &wbc_options()).expect("bundled wbc parses")
}

fn tree(text: &str) -> DecisionTree {
    DecisionTree::parse_text(text).expect("bundled tree parses")
}

pub fn wbc_small_tree() -> DecisionTree {
    tree(WBC_SMALL_TREE)
}

/// The full WBC tree with "begin" read as "benign".
pub fn wbc_tree() -> DecisionTree {
    tree(WBC_TREE).rename_class("begin", "benign")
}

pub fn iris_tree() -> DecisionTree {
    tree(IRIS_TREE)
}

pub fn wine_tree() -> DecisionTree {
    tree(WINE_TREE)
}

pub fn wbc_split_tree() -> DecisionTree {
    tree(WBC_SPLIT_TREE)
}

/// The five example trees paired with the dataset each was grown on.
pub fn all_trees() -> Vec<(&'static str, DecisionTree, Dataset)> {
    vec![
        ("wbc-small", wbc_small_tree(), wbc()),
        ("wbc", wbc_tree(), wbc()),
        ("iris", iris_tree(), iris()),
        ("wine", wine_tree(), wine()),
        ("wbc-split", wbc_split_tree(), wbc()),
    ]
}

/// Bundled dataset by name: `iris`, `wine` or `wbc`.
pub fn dataset(name: &str) -> Option<Dataset> {
    match name {
        "iris" => Some(iris()),
        "wine" => Some(wine()),
        "wbc" => Some(wbc()),
        _ => None,
    }
}

/// Bundled tree by the names used in [`all_trees`].
pub fn tree_named(name: &str) -> Option<DecisionTree> {
    match name {
        "wbc-small" => Some(wbc_small_tree()),
        "wbc" => Some(wbc_tree()),
        "iris" => Some(iris_tree()),
        "wine" => Some(wine_tree()),
        "wbc-split" => Some(wbc_split_tree()),
        _ => None,
    }
}
