use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DecisionTree, TreeError};
use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    /// `None` when the class has no actual cases.
    pub recall: Option<f64>,
    /// `None` when the class is never predicted.
    pub one_minus_precision: Option<f64>,
}

/// Confusion matrix with rows = actual class and columns = predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub error_rate: f64,
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassStats>,
    pub total: u64,
    pub errors: u64,
}

impl EvaluationReport {
    /// Builds the report from a filled confusion matrix.
    pub fn from_confusion(classes: Vec<String>, confusion: Vec<Vec<u64>>) -> EvaluationReport {
        let k = classes.len();
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let errors = total - correct;
        let per_class = (0..k)
            .map(|c| {
                let row: u64 = confusion[c].iter().sum();
                let col: u64 = confusion.iter().map(|r| r[c]).sum();
                let diag = confusion[c][c] as f64;
                ClassStats {
                    class: classes[c].clone(),
                    recall: (row > 0).then(|| diag / row as f64),
                    one_minus_precision: (col > 0).then(|| 1.0 - diag / col as f64),
                }
            })
            .collect();
        EvaluationReport {
            error_rate: if total == 0 {
                0.0
            } else {
                errors as f64 / total as f64
            },
            classes,
            confusion,
            per_class,
            total,
            errors,
        }
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.confusion[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.confusion.iter().map(|r| r[class]).sum()
    }

    pub fn cell(&self, actual: &str, predicted: &str) -> Option<u64> {
        let a = self.classes.iter().position(|c| c == actual)?;
        let p = self.classes.iter().position(|c| c == predicted)?;
        Some(self.confusion[a][p])
    }

    pub fn stats(&self, class: &str) -> Option<&ClassStats> {
        self.per_class.iter().find(|s| s.class == class)
    }

    /// Plain-text layout: error rate, then per-class recall / 1-precision next
    /// to the confusion matrix with row and column sums.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let k = self.classes.len();
        let name_w = self
            .classes
            .iter()
            .map(String::len)
            .chain(["Value".len(), "Sum".len()])
            .max()
            .unwrap_or(5);
        let cell_w = self
            .classes
            .iter()
            .map(String::len)
            .chain([self.total.to_string().len(), 3])
            .max()
            .unwrap_or(3);

        let mut out = String::new();
        writeln!(out, "Error rate {:.4}", self.error_rate).unwrap();
        writeln!(
            out,
            "{:<w$}  {:<20}  Confusion matrix",
            "Values prediction",
            "",
            w = name_w + 8
        )
        .unwrap();
        write!(out, "{:<name_w$}  {:>6}  {:>11}  ", "Value", "Recall", "1-Precision").unwrap();
        for c in &self.classes {
            write!(out, "  {c:>cell_w$}").unwrap();
        }
        writeln!(out, "  {:>cell_w$}", "Sum").unwrap();
        for (i, class) in self.classes.iter().enumerate() {
            let s = &self.per_class[i];
            write!(
                out,
                "{:<name_w$}  {:>6}  {:>11}  ",
                class,
                fmt(s.recall),
                fmt(s.one_minus_precision)
            )
            .unwrap();
            for v in &self.confusion[i] {
                write!(out, "  {v:>cell_w$}").unwrap();
            }
            writeln!(out, "  {:>cell_w$}", self.row_sum(i)).unwrap();
        }
        write!(out, "{:<name_w$}  {:>6}  {:>11}  ", "Sum", "", "").unwrap();
        for c in 0..k {
            write!(out, "  {:>cell_w$}", self.col_sum(c)).unwrap();
        }
        writeln!(out, "  {:>cell_w$}", self.total).unwrap();
        out
    }
}

/// Confusion matrix of `tree` over every case of `dataset`. Classes are the
/// dataset's, followed by any tree class the dataset lacks.
pub fn evaluate(tree: &DecisionTree, dataset: &Dataset) -> Result<EvaluationReport, TreeError> {
    let classifier = tree.bind(dataset)?;
    let mut classes = dataset.classes.clone();
    for c in tree.classes() {
        if !classes.contains(&c) {
            classes.push(c);
        }
    }
    let index = |name: &str| classes.iter().position(|c| c == name);
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for case in &dataset.cases {
        let predicted = classifier.predict(case).class;
        let a = index(&case.label).expect("dataset labels are in its class list");
        let p = index(&predicted).expect("tree classes were appended");
        confusion[a][p] += 1;
    }
    Ok(EvaluationReport::from_confusion(classes, confusion))
}
