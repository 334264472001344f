//! Cohort tables: ingestion, the missing-value policy and feature-set projection.

mod delimited;
mod fixed_width;
mod synthetic;

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delimited::{parse_delimited, write_delimited, DelimitedOptions};
pub use fixed_width::{parse_fixed_width, FieldKind, LayoutField, LayoutSpec, ValueType};
pub use synthetic::{generate_synthetic, plant_informative, PlantedEffect, SyntheticSpec};

/// Value stored in every cell whose measurement is absent.
pub const MISSING_SENTINEL: f64 = -1.0;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("input is empty")]
    Empty,
    #[error("dataset must have at least one feature")]
    NoFeatures,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("label {value} at row {row} is not binary")]
    NonBinaryLabel { row: usize, value: u8 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("layout field `{field}`: {reason}")]
    InvalidLayout { field: String, reason: String },
    #[error("layout fields `{first}` and `{second}` overlap or are out of order")]
    OverlappingFields { first: String, second: String },
    #[error("layout must declare exactly one label field, found {0}")]
    LabelFieldCount(usize),
    #[error("record {record}: line has {len} bytes, field `{field}` needs {needed}")]
    ShortRecord {
        record: usize,
        field: String,
        len: usize,
        needed: usize,
    },
    #[error("line {line}, field `{field}`: cannot parse {text:?} as a number")]
    NonNumeric {
        line: usize,
        field: String,
        text: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown label value {value:?}")]
    UnknownLabel { line: usize, value: String },
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("header row looks numeric ({0:?}); is the file missing its header?")]
    NumericHeader(String),
    #[error("feature `{0}` named in the kind map is absent from the header")]
    UnknownKindMapFeature(String),
    #[error("no features of kind {0:?}")]
    EmptyFeatureSet(FeatureSet),
    #[error("every row was dropped by the label rule")]
    NoRows,
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthetic(String),
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    PhiChar,
    Nutritional,
}

/// Which feature list an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    PhiChar,
    Nutritional,
    Both,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::PhiChar, FeatureSet::Nutritional, FeatureSet::Both];

    pub fn includes(self, kind: FeatureKind) -> bool {
        match self {
            FeatureSet::Both => true,
            FeatureSet::PhiChar => kind == FeatureKind::PhiChar,
            FeatureSet::Nutritional => kind == FeatureKind::Nutritional,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::PhiChar => "phichar",
            FeatureSet::Nutritional => "nutritional",
            FeatureSet::Both => "both",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FeatureSet::PhiChar => "Phi CHAR",
            FeatureSet::Nutritional => "Nutritional",
            FeatureSet::Both => "Nutritional + Phi CHAR",
        }
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "phichar" | "phi" => Ok(FeatureSet::PhiChar),
            "nutritional" | "nutrition" => Ok(FeatureSet::Nutritional),
            "both" | "all" => Ok(FeatureSet::Both),
            other => Err(format!("unknown feature set `{other}`")),
        }
    }
}

/// Where a column came from in its source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnSource {
    Delimited { index: usize },
    FixedWidth { start: usize, width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub source: ColumnSource,
}

/// Maps raw outcome codes to case (1) / control (0).
///
/// The default accepts exactly `1` and `0`. A pairing such as "case vs heart
/// disease" lists the raw codes for each side and drops every other row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub case: Vec<String>,
    /// `None` means every non-case value is a control.
    #[serde(default)]
    pub control: Option<Vec<String>>,
    /// Drop rows matching neither side instead of failing.
    #[serde(default)]
    pub drop_unmatched: bool,
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule {
            case: vec!["1".into()],
            control: Some(vec!["0".into()]),
            drop_unmatched: false,
        }
    }
}

fn code_matches(code: &str, raw: &str) -> bool {
    if code == raw {
        return true;
    }
    match (code.parse::<f64>(), raw.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Outcome of applying a [`LabelRule`] to one raw value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelDecision {
    Keep(u8),
    Drop,
    Unknown,
}

impl LabelRule {
    pub fn classify(&self, raw: &str) -> LabelDecision {
        let raw = raw.trim();
        if self.case.iter().any(|c| code_matches(c.trim(), raw)) {
            return LabelDecision::Keep(1);
        }
        match &self.control {
            None => LabelDecision::Keep(0),
            Some(codes) if codes.iter().any(|c| code_matches(c.trim(), raw)) => LabelDecision::Keep(0),
            Some(_) if self.drop_unmatched => LabelDecision::Drop,
            Some(_) => LabelDecision::Unknown,
        }
    }
}

/// A rectangular cohort table with binary labels and a missingness mask.
///
/// Values are immutable once built. Cells flagged in `missing` hold `NaN`
/// straight out of a parser and [`MISSING_SENTINEL`] after
/// [`apply_missing_policy`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Array2<f64>,
    labels: Vec<u8>,
    specs: Vec<FeatureSpec>,
    missing: Array2<bool>,
}

impl Dataset {
    pub fn new(
        rows: Array2<f64>,
        labels: Vec<u8>,
        specs: Vec<FeatureSpec>,
        missing: Array2<bool>,
    ) -> Result<Self> {
        let (n, p) = rows.dim();
        if n == 0 {
            return Err(DatasetError::NoRows);
        }
        if p == 0 {
            return Err(DatasetError::NoFeatures);
        }
        if labels.len() != n || specs.len() != p || missing.dim() != (n, p) {
            return Err(DatasetError::Shape(format!(
                "{n}x{p} values, {} labels, {} specs, {:?} mask",
                labels.len(),
                specs.len(),
                missing.dim()
            )));
        }
        if let Some((row, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
            return Err(DatasetError::NonBinaryLabel { row, value });
        }
        let mut seen = HashSet::new();
        for spec in &specs {
            if !seen.insert(spec.name.as_str()) {
                return Err(DatasetError::DuplicateFeature(spec.name.clone()));
            }
        }
        // Standard layout lets callers borrow rows as plain slices.
        let rows = if rows.is_standard_layout() { rows } else { rows.as_standard_layout().into_owned() };
        Ok(Dataset { rows, labels, specs, missing })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn missing(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows
            .row(i)
            .to_slice()
            .expect("dataset rows are kept in standard layout")
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.rows.column(j)
    }

    /// Rows gathered by index (duplicates allowed) as an owned matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Array2<f64> {
        self.rows.select(Axis(0), indices)
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Per-feature count of flagged cells.
    pub fn missing_by_feature(&self) -> Vec<usize> {
        self.missing
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&m| m).count())
            .collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let cases = self.labels.iter().filter(|&&l| l == 1).count();
        (cases, self.labels.len() - cases)
    }
}

/// Overwrite every flagged cell with [`MISSING_SENTINEL`]; the mask is kept.
pub fn apply_missing_policy(mut ds: Dataset) -> Dataset {
    ndarray::Zip::from(&mut ds.rows)
        .and(&ds.missing)
        .for_each(|v, &m| {
            if m {
                *v = MISSING_SENTINEL;
            }
        });
    ds
}

/// Column projection onto one of the three feature lists, preserving column order.
pub fn select_feature_set(ds: &Dataset, which: FeatureSet) -> Result<Dataset> {
    let cols: Vec<usize> = ds
        .specs
        .iter()
        .enumerate()
        .filter(|(_, s)| which.includes(s.kind))
        .map(|(j, _)| j)
        .collect();
    if cols.is_empty() {
        return Err(DatasetError::EmptyFeatureSet(which));
    }
    Ok(Dataset {
        rows: ds.rows.select(Axis(1), &cols).as_standard_layout().into_owned(),
        labels: ds.labels.clone(),
        specs: cols.iter().map(|&j| ds.specs[j].clone()).collect(),
        missing: ds.missing.select(Axis(1), &cols),
    })
}
