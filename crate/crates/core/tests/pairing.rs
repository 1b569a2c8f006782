use std::collections::{BTreeMap, BTreeSet};

use spcdt::fixtures;
use spcdt::pairing::{derive_plot_units, Bound, PairingPlan, PlotId};

fn pairs(plan: &PairingPlan) -> Vec<(&str, &str)> {
    plan.plots.iter().map(|p| (p.h_attr.as_str(), p.v_attr.as_str())).collect()
}

/// Conjunction of every region interval on the way from the root plot to a
/// region, rebuilt from geometry only.
fn conjunction(plan: &PairingPlan, plot: PlotId, region: usize) -> BTreeMap<String, Bound> {
    let mut rules: BTreeMap<String, Bound> = BTreeMap::new();
    let mut at = Some((plot, region));
    while let Some((p, r)) = at {
        let unit = &plan.plots[p];
        let reg = &unit.regions[r];
        let mut add = |attr: &str, b: Bound| {
            let e = rules.entry(attr.to_string()).or_insert(Bound::ALL);
            if let Some(lo) = b.lo {
                *e = e.at_or_above(lo);
            }
            if let Some(hi) = b.hi {
                *e = e.below(hi);
            }
        };
        add(&unit.h_attr, reg.h_interval);
        if !unit.is_repeated() {
            add(&unit.v_attr, reg.v_interval);
        }
        at = unit.parent;
    }
    rules.retain(|_, b| *b != Bound::ALL);
    rules
}

fn rule_text(rules: &BTreeMap<String, Bound>) -> String {
    let mut parts = Vec::new();
    for (attr, b) in rules {
        if let Some(lo) = b.lo {
            parts.push(format!("{attr} >= {lo}"));
        }
        if let Some(hi) = b.hi {
            parts.push(format!("{attr} < {hi}"));
        }
    }
    parts.sort();
    parts.join(" & ")
}

fn rule(parts: &[&str]) -> String {
    let mut v: Vec<&str> = parts.to_vec();
    v.sort();
    v.join(" & ")
}

#[test]
fn small_wbc_tree_pairs_into_three_plots() {
    let plan = derive_plot_units(&fixtures::wbc_small_tree(), &fixtures::wbc()).unwrap();
    assert_eq!(
        pairs(&plan),
        [("ucellsize", "bnuclei"), ("bchromatin", "clump"), ("bnuclei", "mgadhesion")]
    );
    assert_eq!(plan.decided_region_count(), 7);
    assert_eq!(plan.undecided_region_count(), 2);

    // gray routing 0 -> 1 -> 2
    let gray: Vec<(PlotId, PlotId)> = plan
        .plots
        .iter()
        .flat_map(|p| p.regions.iter().filter_map(move |r| r.dest_plot().map(|d| (p.plot_id, d))))
        .collect();
    assert_eq!(gray, [(0, 1), (1, 2)]);
    assert_eq!(plan.plots[1].parent.map(|p| p.0), Some(0));
    assert_eq!(plan.plots[2].parent.map(|p| p.0), Some(1));

    let mut got = BTreeSet::new();
    for p in &plan.plots {
        for (i, r) in p.regions.iter().enumerate() {
            if let Some(c) = r.class() {
                got.insert(format!("{} => {c}", rule_text(&conjunction(&plan, p.plot_id, i))));
            }
        }
    }
    let big = "ucellsize >= 2.5";
    let expected: BTreeSet<String> = [
        (rule(&["ucellsize < 2.5", "bnuclei < 4.5"]), "benign"),
        (rule(&["ucellsize < 2.5", "bnuclei >= 4.5"]), "malignant"),
        (rule(&[big, "bchromatin < 1.5"]), "benign"),
        (rule(&[big, "bchromatin >= 1.5", "clump >= 4.5"]), "malignant"),
        (rule(&[big, "bchromatin >= 1.5", "clump < 4.5", "bnuclei < 6", "mgadhesion < 3.5"]), "benign"),
        (rule(&[big, "bchromatin >= 1.5", "clump < 4.5", "bnuclei < 6", "mgadhesion >= 3.5"]), "malignant"),
        (rule(&[big, "bchromatin >= 1.5", "clump < 4.5", "bnuclei >= 6"]), "malignant"),
    ]
    .into_iter()
    .map(|(r, c)| format!("{r} => {c}"))
    .collect();
    assert_eq!(got, expected);
}

#[test]
fn iris_tree_pairs() {
    let plan = derive_plot_units(&fixtures::iris_tree(), &fixtures::iris()).unwrap();
    assert_eq!(
        pairs(&plan),
        [
            ("petal-length", "petal-width"),
            ("petal-length", "sepal-width"),
            ("sepal-length", "sepal-length")
        ]
    );
    let p0 = &plan.plots[0];
    assert_eq!(p0.regions.iter().filter(|r| !r.is_decided()).count(), 2);
    assert_eq!(p0.h_thresholds, [2.45]);
    assert_eq!(p0.v_thresholds, [1.75]);
    // the repeated plot constrains only its horizontal axis
    assert!(plan.plots[2].regions.iter().all(|r| r.v_interval == Bound::ALL));
    // shade keys number the gray regions of each plot
    let keys: Vec<usize> = p0
        .regions
        .iter()
        .filter_map(|r| match r.kind {
            spcdt::pairing::RegionKind::Undecided { shade_key, .. } => Some(shade_key),
            _ => None,
        })
        .collect();
    assert_eq!(keys, [0, 1]);
}

#[test]
fn plan_sizes_for_every_tree() {
    let sizes: Vec<(&str, usize, usize, usize)> = fixtures::all_trees()
        .iter()
        .map(|(n, t, d)| {
            let plan = derive_plot_units(t, d).unwrap();
            (*n, plan.plots.len(), plan.decided_region_count(), plan.undecided_region_count())
        })
        .collect();
    // decided regions are exactly the leaves; each non-root plot has one gray entry
    for ((_, t, _), (_, plots, decided, gray)) in fixtures::all_trees().iter().zip(&sizes) {
        assert_eq!(*decided, t.leaf_count());
        assert_eq!(*gray, plots - 1);
    }
    assert_eq!(
        sizes,
        [
            ("wbc-small", 3, 7, 2),
            ("wbc", 7, 14, 6),
            ("iris", 3, 7, 2),
            ("wine", 4, 7, 3),
            ("wbc-split", 3, 7, 2),
        ]
    );
}

#[test]
fn probe_grid_hits_exactly_one_region() {
    for (name, tree, data) in fixtures::all_trees() {
        let plan = derive_plot_units(&tree, &data).unwrap();
        for p in &plan.plots {
            for i in 0..50 {
                for j in 0..50 {
                    let h = p.h_range.denormalize(i as f64 / 49.0);
                    let v = if p.is_repeated() { h } else { p.v_range.denormalize(j as f64 / 49.0) };
                    let hits = p.regions.iter().filter(|r| r.contains(h, v)).count();
                    assert_eq!(hits, 1, "{name} plot {} at ({h}, {v})", p.plot_id);
                }
            }
        }
    }
}

#[test]
fn region_routing_agrees_with_prediction() {
    for (name, tree, data) in fixtures::all_trees() {
        let plan = derive_plot_units(&tree, &data).unwrap();
        let classifier = tree.bind(&data).unwrap();
        for case in &data.cases {
            let visits = plan.trace(&classifier, case).unwrap();
            let last = visits.last().unwrap();
            let region = &plan.plots[last.plot].regions[last.region];
            let predicted = classifier.predict(case);
            assert_eq!(region.class(), Some(predicted.class.as_str()), "{name} case {}", case.id);
            assert_eq!(region.node(), predicted.leaf, "{name} case {}", case.id);
        }
    }
}

#[test]
fn missing_values_are_imputed_inside_their_region() {
    let (tree, data) = (fixtures::wbc_tree(), fixtures::wbc());
    let plan = derive_plot_units(&tree, &data).unwrap();
    let classifier = tree.bind(&data).unwrap();
    let mut imputed = 0;
    for case in data.cases.iter().filter(|c| c.values.iter().any(Option::is_none)) {
        for v in plan.trace(&classifier, case).unwrap() {
            let region = &plan.plots[v.plot].regions[v.region];
            assert!(region.contains(v.point.0, v.point.1));
            imputed += v.imputed as usize;
        }
    }
    assert!(imputed >= 16);
}
