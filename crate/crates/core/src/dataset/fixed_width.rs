//! Layout-driven fixed-width record parsing, the distribution format of
//! large national survey files.

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    ColumnSource, Dataset, DatasetError, FeatureKind, FeatureSpec, LabelDecision, LabelRule, Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Numeric,
    /// Categorical survey codes, kept as their numeric code.
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    PhiChar,
    Nutritional,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutField {
    pub name: String,
    /// 0-based byte offset.
    pub start: usize,
    pub width: usize,
    #[serde(rename = "type", default = "numeric")]
    pub value_type: ValueType,
    /// Field texts (after trimming) that mean "not measured". `""` matches a blank field.
    #[serde(default)]
    pub missing_codes: Vec<String>,
    pub kind: FieldKind,
}

fn numeric() -> ValueType {
    ValueType::Numeric
}

impl LayoutField {
    fn end(&self) -> usize {
        self.start + self.width
    }
}

/// Ordered, non-overlapping field list. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayoutSpec {
    pub fields: Vec<LayoutField>,
}

impl LayoutSpec {
    pub fn new(fields: Vec<LayoutField>) -> Result<Self> {
        let layout = LayoutSpec { fields };
        layout.validate()?;
        Ok(layout)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let layout: LayoutSpec = serde_json::from_str(text).map_err(|e| e.to_string())?;
        layout.validate().map_err(|e| e.to_string())?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for f in &self.fields {
            if f.width == 0 {
                return Err(DatasetError::InvalidLayout { field: f.name.clone(), reason: "width must be at least 1".into() });
            }
            if !names.insert(f.name.as_str()) {
                return Err(DatasetError::DuplicateFeature(f.name.clone()));
            }
        }
        for pair in self.fields.windows(2) {
            if pair[1].start < pair[0].end() {
                return Err(DatasetError::OverlappingFields {
                    first: pair[0].name.clone(),
                    second: pair[1].name.clone(),
                });
            }
        }
        let labels = self.fields.iter().filter(|f| f.kind == FieldKind::Label).count();
        if labels != 1 {
            return Err(DatasetError::LabelFieldCount(labels));
        }
        if labels == self.fields.len() {
            return Err(DatasetError::NoFeatures);
        }
        Ok(())
    }

    pub fn record_len(&self) -> usize {
        self.fields.iter().map(LayoutField::end).max().unwrap_or(0)
    }
}

/// Parse newline-separated fixed-width records.
///
/// Cells matching a declared missing code are flagged in the mask and hold
/// `NaN`; the sentinel is applied separately by `apply_missing_policy`.
pub fn parse_fixed_width(bytes: &[u8], layout: &LayoutSpec, label_rule: &LabelRule) -> Result<Dataset> {
    layout.validate()?;
    let mut lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    while lines.last().is_some_and(|l| l.is_empty() || *l == b"\r") {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(DatasetError::Empty);
    }

    let features: Vec<&LayoutField> = layout.fields.iter().filter(|f| f.kind != FieldKind::Label).collect();
    let label_field = layout.fields.iter().find(|f| f.kind == FieldKind::Label).expect("validated");
    let specs: Vec<FeatureSpec> = features
        .iter()
        .map(|f| FeatureSpec {
            name: f.name.clone(),
            kind: if f.kind == FieldKind::PhiChar { FeatureKind::PhiChar } else { FeatureKind::Nutritional },
            source: ColumnSource::FixedWidth { start: f.start, width: f.width },
        })
        .collect();

    let mut values = Vec::with_capacity(lines.len() * features.len());
    let mut mask = Vec::with_capacity(lines.len() * features.len());
    let mut labels = Vec::with_capacity(lines.len());

    for (idx, raw) in lines.iter().enumerate() {
        let record = idx + 1;
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        let text = |f: &LayoutField| -> Result<String> {
            if line.len() < f.end() {
                return Err(DatasetError::ShortRecord {
                    record,
                    field: f.name.clone(),
                    len: line.len(),
                    needed: f.end(),
                });
            }
            Ok(String::from_utf8_lossy(&line[f.start..f.end()]).trim().to_string())
        };

        let raw_label = text(label_field)?;
        let label = match label_rule.classify(&raw_label) {
            LabelDecision::Keep(l) => l,
            LabelDecision::Drop => continue,
            LabelDecision::Unknown => return Err(DatasetError::UnknownLabel { line: record, value: raw_label }),
        };

        for f in &features {
            let cell = text(f)?;
            if f.missing_codes.iter().any(|c| c.trim() == cell) {
                values.push(f64::NAN);
                mask.push(true);
                continue;
            }
            let v = cell.parse::<f64>().map_err(|_| DatasetError::NonNumeric {
                line: record,
                field: f.name.clone(),
                text: cell.clone(),
            })?;
            values.push(v);
            mask.push(false);
        }
        labels.push(label);
    }

    let (n, p) = (labels.len(), specs.len());
    if n == 0 {
        return Err(DatasetError::NoRows);
    }
    let rows = Array2::from_shape_vec((n, p), values).map_err(|e| DatasetError::Shape(e.to_string()))?;
    let missing = Array2::from_shape_vec((n, p), mask).map_err(|e| DatasetError::Shape(e.to_string()))?;
    Dataset::new(rows, labels, specs, missing)
}
