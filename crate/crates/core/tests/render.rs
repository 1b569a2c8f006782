use std::path::PathBuf;

use spcdt::fixtures;
use spcdt::pairing::derive_plot_units;
use spcdt::render::{to_svg, RenderConfig, RenderError};
use spcdt::scene::{build_scene, default_placement, SceneGraph, SceneOptions};
use spcdt::{DecisionTree, Dataset};

fn scene(tree: &DecisionTree, data: &Dataset) -> SceneGraph {
    let plan = derive_plot_units(tree, data).unwrap();
    build_scene(tree, &plan, data, &default_placement(&plan), &SceneOptions::default()).unwrap()
}

fn svg(scene: &SceneGraph) -> String {
    to_svg(scene, &RenderConfig::for_scene(scene)).unwrap()
}

/// Compares against `tests/golden/<name>`; `SPCDT_BLESS=1` rewrites the file.
fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("SPCDT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the golden file");
}

#[test]
fn iris_golden() {
    let (t, d) = (fixtures::iris_tree(), fixtures::iris());
    let a = svg(&scene(&t, &d));
    let b = svg(&scene(&t, &d));
    assert_eq!(a, b);
    golden("iris.svg", &a);
}

#[test]
fn small_wbc_golden() {
    let (t, d) = (fixtures::wbc_small_tree(), fixtures::wbc());
    let a = svg(&scene(&t, &d));
    assert_eq!(a, svg(&scene(&t, &d)));
    assert_eq!(a.matches(r#"class="region""#).count(), 9);
    assert_eq!(a.matches(r#"class="case""#).count(), 699);
    golden("wbc_small.svg", &a);
}

#[test]
fn element_order() {
    let s = svg(&scene(&fixtures::iris_tree(), &fixtures::iris()));
    let plots: Vec<usize> = s.match_indices(r#"class="plot""#).map(|(i, _)| i).collect();
    let first_case = s.find(r#"class="case""#).unwrap();
    assert!(plots.iter().all(|&p| p < first_case));
    let ids: Vec<usize> = s
        .lines()
        .filter(|l| l.starts_with(r#"<polyline class="case""#) || l.starts_with(r#"<circle class="case""#))
        .map(|l| l.split("data-case=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ids, (0..150).collect::<Vec<_>>());
    // all numbers carry four decimals
    let re = regex::Regex::new(r#" (?:x|y|cx|cy|r|width|height)="(-?[0-9.]+)""#).unwrap();
    for cap in re.captures_iter(&s) {
        let v = &cap[1];
        assert_eq!(v.split('.').nth(1).map(str::len), Some(4), "{v}");
    }
    // misclassified cases are framed
    assert_eq!(s.matches(r#"class="misclassified""#).count(), 4);
}

#[test]
fn empty_scene() {
    let s = to_svg(&SceneGraph::empty(), &RenderConfig::default()).unwrap();
    assert!(s.starts_with("<?xml"));
    assert!(s.trim_end().ends_with("</svg>"));
    assert!(s.contains(r#"class="canvas""#));
    assert!(s.contains(r#"class="legend""#));
    assert!(!s.contains(r#"class="region""#));
    assert!(!s.contains("<polyline"));
}

#[test]
fn palette_must_cover_classes() {
    let sc = scene(&fixtures::iris_tree(), &fixtures::iris());
    let mut config = RenderConfig::for_scene(&sc);
    config.palette.remove("Iris-virginica");
    assert_eq!(
        to_svg(&sc, &config),
        Err(RenderError::MissingColor("Iris-virginica".into()))
    );
}

#[test]
fn tags_balance() {
    let s = svg(&scene(&fixtures::wine_tree(), &fixtures::wine()));
    for tag in ["g", "svg", "text", "rect", "title", "defs", "marker"] {
        let open = s.matches(&format!("<{tag} ")).count() + s.matches(&format!("<{tag}>")).count();
        let close = s.matches(&format!("</{tag}>")).count();
        let selfclosed = s
            .split(&format!("<{tag} "))
            .skip(1)
            .filter(|rest| {
                let end = rest.find('>').unwrap();
                rest[..end].ends_with('/')
            })
            .count();
        assert_eq!(open, close + selfclosed, "{tag}");
    }
}
