//! Tabular data: CSV loading, attribute metadata, ranges and seeded splits.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-width used when an attribute has zero observed width.
pub const ZERO_WIDTH_EPSILON: f64 = 0.5;

pub type CaseId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("empty input")]
    Empty,
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown label column '{0}'")]
    UnknownLabelColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("row {row}, column '{column}': '{value}' is not a number")]
    NotNumeric { row: usize, column: String, value: String },
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("declared range [{lo}, {hi}] for '{attr}' does not contain observed values")]
    DeclaredRange { attr: String, lo: f64, hi: f64 },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("split of {n} cases at fraction {fraction} leaves one side empty")]
    EmptySide { n: usize, fraction: f64 },
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_range(&self, other: &Range) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Position of `x` in the unit interval, clamped.
    pub fn normalize(&self, x: f64) -> f64 {
        ((x - self.lo) / self.width()).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMeta {
    pub name: String,
    pub index: usize,
    /// `None` when the column holds no values at all.
    pub observed: Option<Range>,
    pub declared_range: Option<Range>,
}

impl AttributeMeta {
    /// Declared range if present, else observed extremes; zero-width ranges are widened.
    pub fn range(&self) -> Range {
        let r = self
            .declared_range
            .or(self.observed)
            .unwrap_or(Range::new(0.0, 0.0));
        if r.width() > 0.0 {
            r
        } else {
            Range::new(r.lo - ZERO_WIDTH_EPSILON, r.hi + ZERO_WIDTH_EPSILON)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: CaseId,
    pub values: Vec<Option<f64>>,
    pub label: String,
}

impl Case {
    pub fn value(&self, attr: usize) -> Option<f64> {
        self.values.get(attr).copied().flatten()
    }
}

/// Labeled n-D cases plus schema. Immutable after construction.
///
/// Loaded datasets have ids dense from 0. Subsets produced by [`Dataset::split`]
/// keep the ids of the source so a case can be traced back to its row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub attributes: Vec<AttributeMeta>,
    pub cases: Vec<Case>,
    pub classes: Vec<String>,
    pub label_column: String,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    pub missing_token: String,
    pub declared_ranges: BTreeMap<String, Range>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            label_column: "class".to_string(),
            missing_token: "?".to_string(),
            declared_ranges: BTreeMap::new(),
        }
    }
}

impl LoadOptions {
    pub fn with_range(mut self, attr: &str, lo: f64, hi: f64) -> Self {
        self.declared_ranges.insert(attr.to_string(), Range::new(lo, hi));
        self
    }
}

/// Loads a header-bearing CSV. Every column except the label column is numeric.
pub fn load_csv<R: Read>(source: R, options: &LoadOptions) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(DatasetError::Empty),
        Some(r) => r.map_err(|e| DatasetError::Csv(e.to_string()))?,
    };
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(DatasetError::Empty);
    }
    let label_idx = header
        .iter()
        .position(|h| *h == options.label_column)
        .ok_or_else(|| DatasetError::UnknownLabelColumn(options.label_column.clone()))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&i| i != label_idx).collect();

    let mut cases = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    for (row_no, record) in records.enumerate() {
        let record = record.map_err(|e| DatasetError::Csv(e.to_string()))?;
        // csv row numbering: header is row 1
        let row = row_no + 2;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != header.len() {
            return Err(DatasetError::Arity {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let raw = &record[col];
            if raw == options.missing_token {
                values.push(None);
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| DatasetError::NotNumeric {
                row,
                column: header[col].clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NotNumeric {
                    row,
                    column: header[col].clone(),
                    value: raw.to_string(),
                });
            }
            values.push(Some(v));
        }
        let label = record[label_idx].to_string();
        if !classes.contains(&label) {
            classes.push(label.clone());
        }
        cases.push(Case {
            id: cases.len(),
            values,
            label,
        });
    }

    let names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::from_parts(
        names,
        cases,
        classes,
        options.label_column.clone(),
        &options.declared_ranges,
    )
}

impl Dataset {
    /// Assembles a dataset, computing observed ranges and validating declared ones.
    pub fn from_parts(
        names: Vec<String>,
        cases: Vec<Case>,
        classes: Vec<String>,
        label_column: String,
        declared: &BTreeMap<String, Range>,
    ) -> Result<Dataset, DatasetError> {
        for name in declared.keys() {
            if !names.contains(name) {
                return Err(DatasetError::UnknownAttribute(name.clone()));
            }
        }
        let attributes = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| {
                let observed = observed_range(&cases, index);
                let declared_range = declared.get(&name).copied();
                if let (Some(d), Some(o)) = (declared_range, observed) {
                    if !d.contains_range(&o) {
                        return Err(DatasetError::DeclaredRange {
                            attr: name,
                            lo: d.lo,
                            hi: d.hi,
                        });
                    }
                }
                Ok(AttributeMeta {
                    name,
                    index,
                    observed,
                    declared_range,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            attributes,
            cases,
            classes,
            label_column,
        })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeMeta, DatasetError> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| DatasetError::UnknownAttribute(name.to_string()))
    }

    /// Plotting range of an attribute.
    pub fn attribute_range(&self, name: &str) -> Result<Range, DatasetError> {
        self.attribute(name).map(AttributeMeta::range)
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn case(&self, id: CaseId) -> Option<&Case> {
        // ids are ascending, usually dense
        match self.cases.get(id) {
            Some(c) if c.id == id => Some(c),
            _ => self
                .cases
                .binary_search_by_key(&id, |c| c.id)
                .ok()
                .map(|i| &self.cases[i]),
        }
    }

    pub fn declared_ranges(&self) -> BTreeMap<String, Range> {
        self.attributes
            .iter()
            .filter_map(|a| a.declared_range.map(|r| (a.name.clone(), r)))
            .collect()
    }

    /// Same schema and class list over the given cases.
    pub fn with_cases(&self, cases: Vec<Case>) -> Dataset {
        let names = self.attributes.iter().map(|a| a.name.clone()).collect();
        Dataset::from_parts(
            names,
            cases,
            self.classes.clone(),
            self.label_column.clone(),
            &self.declared_ranges(),
        )
        .expect("subset of a valid dataset stays within declared ranges")
    }

    /// Plain shuffled (non-stratified) split; `|train| = round(fraction * N)`.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DatasetError::Fraction(train_fraction));
        }
        let n = self.len();
        let n_train = (train_fraction * n as f64).round() as usize;
        if n_train == 0 || n_train >= n {
            return Err(DatasetError::EmptySide {
                n,
                fraction: train_fraction,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut train_idx = order[..n_train].to_vec();
        let mut valid_idx = order[n_train..].to_vec();
        train_idx.sort_unstable();
        valid_idx.sort_unstable();
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.cases[i].clone()).collect();
        Ok((self.with_cases(pick(&train_idx)), self.with_cases(pick(&valid_idx))))
    }

    /// CSV text with the label column last and `missing_token` for missing values.
    pub fn to_csv(&self, missing_token: &str) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.label_column);
        out.push_str(&header.join(","));
        out.push('\n');
        for case in &self.cases {
            for v in &case.values {
                match v {
                    Some(x) => out.push_str(&x.to_string()),
                    None => out.push_str(missing_token),
                }
                out.push(',');
            }
            out.push_str(&case.label);
            out.push('\n');
        }
        out
    }

    /// Number of cases per class, in class order.
    pub fn class_counts(&self) -> Vec<usize> {
        let index: HashMap<&str, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut counts = vec![0; self.classes.len()];
        for case in &self.cases {
            counts[index[case.label.as_str()]] += 1;
        }
        counts
    }
}

fn observed_range(cases: &[Case], attr: usize) -> Option<Range> {
    cases
        .iter()
        .filter_map(|c| c.value(attr))
        .fold(None, |acc: Option<Range>, x| match acc {
            None => Some(Range::new(x, x)),
            Some(r) => Some(Range::new(r.lo.min(x), r.hi.max(x))),
        })
}
