use spcdt::analysis::{margins, overgeneralization, split_compare};
use spcdt::dtree::{evaluate, induce_id3, InduceParams};
use spcdt::fixtures;

/// `(value of column, label)` straight from CSV text.
fn column(csv: &str, name: &str) -> Vec<(Option<f64>, String)> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[col].parse().ok(), f.last().unwrap().to_string())
        })
        .collect()
}

#[test]
fn setosa_rule_slack() {
    let pl = column(fixtures::IRIS_CSV, "petal-length");
    let setosa: Vec<f64> = pl.iter().filter(|(_, c)| c == "Iris-setosa").map(|(v, _)| v.unwrap()).collect();
    let lo = setosa.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = setosa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((lo, hi), (1.0, 1.9));

    let r = overgeneralization(&fixtures::iris_tree(), &fixtures::iris()).unwrap();
    let leaf = &r.leaves[0];
    assert_eq!(leaf.class, "Iris-setosa");
    assert_eq!(leaf.covered, 50);
    let a = &leaf.attributes[0];
    assert_eq!(a.attribute, "petal-length");
    assert_eq!(a.data_interval, Some([lo, hi]));
    assert_eq!(a.rule_interval, [1.0, 2.45]);
    assert!((a.slack_high - 0.55).abs() < 1e-12);
    assert_eq!(a.slack_low, 0.0);
}

#[test]
fn slack_lists_path_attributes_only() {
    let tree = fixtures::iris_tree();
    let r = overgeneralization(&tree, &fixtures::iris()).unwrap();
    for leaf in &r.leaves {
        let on_path: std::collections::BTreeSet<String> = tree
            .path_to(leaf.leaf_id)
            .iter()
            .map(|(n, _)| tree.split(*n).unwrap().attribute.clone())
            .collect();
        let listed: std::collections::BTreeSet<String> = leaf.attributes.iter().map(|a| a.attribute.clone()).collect();
        assert_eq!(listed, on_path);
        for a in &leaf.attributes {
            assert!(a.slack_low >= 0.0 && a.slack_high >= 0.0);
            if let Some([d0, d1]) = a.data_interval {
                assert!(a.rule_interval[0] <= d0 && d1 <= a.rule_interval[1]);
            }
        }
    }
}

#[test]
fn iris_root_margin() {
    let pl = column(fixtures::IRIS_CSV, "petal-length");
    let below = pl.iter().filter_map(|(v, _)| *v).filter(|&v| v < 2.45).fold(f64::NEG_INFINITY, f64::max);
    let above = pl.iter().filter_map(|(v, _)| *v).filter(|&v| v >= 2.45).fold(f64::INFINITY, f64::min);
    assert_eq!((below, above), (1.9, 3.0));

    let r = margins(&fixtures::iris_tree(), &fixtures::iris(), Some(0.1)).unwrap();
    let root = &r.nodes[0];
    assert_eq!(root.threshold, 2.45);
    assert_eq!((root.nearest_low, root.nearest_high), (Some(1.9), Some(3.0)));
    assert!(root.borderline.is_empty());
    assert_eq!(root.reaching, 150);
}

#[test]
fn wbc_integer_margin() {
    let r = margins(&fixtures::wbc_small_tree(), &fixtures::wbc(), None).unwrap();
    let root = &r.nodes[0];
    assert_eq!(root.threshold, 2.5);
    assert_eq!((root.nearest_low, root.nearest_high), (Some(2.0), Some(3.0)));
    // 1% of the declared 1..10 scale is far below the 0.5 gap
    assert!((root.epsilon - 0.09).abs() < 1e-12);
    assert!(root.borderline.is_empty());
    let wide = margins(&fixtures::wbc_small_tree(), &fixtures::wbc(), Some(0.5)).unwrap();
    assert!(wide.nodes[0].borderline.iter().all(|b| b.distance == 0.5));
    assert!(!wide.nodes[0].borderline.is_empty());
    assert!(wide.nodes[0].borderline.iter().any(|b| b.opposite_class));
}

#[test]
fn zero_epsilon_has_no_borderline_cases() {
    for (_, tree, data) in fixtures::all_trees() {
        let r = margins(&tree, &data, Some(0.0)).unwrap();
        assert!(r.nodes.iter().all(|n| n.borderline.is_empty()));
    }
}

#[test]
fn seeded_split_comparison() {
    let wbc = fixtures::wbc();
    let (train, validation) = wbc.split(0.9, 7).unwrap();
    assert_eq!((train.len(), validation.len()), (629, 70));
    let tree = induce_id3(&train, InduceParams::default());
    let r = split_compare(&tree, &train, &validation).unwrap();
    assert_eq!(r.train_eval, evaluate(&tree, &train).unwrap());
    assert_eq!(r.validation_eval, evaluate(&tree, &validation).unwrap());
    assert_eq!(r.regions.iter().map(|x| x.train_count).sum::<usize>(), 629);
    assert_eq!(r.regions.iter().map(|x| x.validation_count).sum::<usize>(), 70);
    assert_eq!(r.regions.len(), tree.leaf_count());
    let table = r.to_table();
    assert!(table.starts_with("Training\nError rate "));
    assert!(table.contains("\nValidation\nError rate "));
}

#[test]
fn single_case_validation() {
    let iris = fixtures::iris();
    let tree = fixtures::iris_tree();
    let one = iris.with_cases(vec![iris.cases[0].clone()]);
    let r = split_compare(&tree, &iris, &one).unwrap();
    let hit: Vec<_> = r.regions.iter().filter(|x| x.validation_count > 0).collect();
    assert_eq!(hit.len(), 1);
    assert!(hit[0].train_count > 0);
    assert!(r.validation_only.is_empty());
    assert_eq!(r.train_only.len(), tree.leaf_count() - 1);
}

#[test]
fn unseen_validation_class_counts_as_error() {
    let iris = fixtures::iris();
    let mut case = iris.cases[0].clone();
    case.label = "Iris-unknown".into();
    let names = iris.attributes.iter().map(|a| a.name.clone()).collect();
    let odd = spcdt::Dataset::from_parts(
        names,
        vec![case],
        vec!["Iris-unknown".into()],
        "class".into(),
        &Default::default(),
    )
    .unwrap();
    let r = split_compare(&fixtures::iris_tree(), &iris, &odd).unwrap();
    assert_eq!(r.validation_eval.errors, 1);
}
