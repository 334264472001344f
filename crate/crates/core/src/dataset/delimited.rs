use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;

use super::{
    ColumnSource, Dataset, DatasetError, FeatureKind, FeatureSpec, LabelDecision, LabelRule, Result,
};

#[derive(Debug, Clone)]
pub struct DelimitedOptions {
    pub delimiter: u8,
    pub header: bool,
    /// Name of the outcome column. Without a header the last column is the label.
    pub label_column: String,
    /// Feature kinds by name; unlisted features are nutritional.
    pub kind_map: BTreeMap<String, FeatureKind>,
    pub label_rule: LabelRule,
}

impl Default for DelimitedOptions {
    fn default() -> Self {
        DelimitedOptions {
            delimiter: b',',
            header: true,
            label_column: "label".into(),
            kind_map: BTreeMap::new(),
            label_rule: LabelRule::default(),
        }
    }
}

/// Parse a delimited table. Empty feature cells are flagged missing and hold `NaN`.
pub fn parse_delimited(text: &str, opts: &DelimitedOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line() as usize);

    let first = match records.next() {
        None => return Err(DatasetError::Empty),
        Some(r) => r.map_err(|e| DatasetError::Csv(e.to_string()))?,
    };
    let width = first.len();

    let (names, label_idx, pending_first) = if opts.header {
        let names: Vec<String> = first.iter().map(|s| s.trim().to_string()).collect();
        let label_idx = match names.iter().position(|n| *n == opts.label_column) {
            Some(i) => i,
            None if names.iter().all(|n| n.parse::<f64>().is_ok()) => {
                return Err(DatasetError::NumericHeader(names.join(",")))
            }
            None => return Err(DatasetError::MissingLabelColumn(opts.label_column.clone())),
        };
        (names, label_idx, None)
    } else {
        let names = (0..width).map(|j| format!("f{j}")).collect();
        (names, width - 1, Some(first))
    };

    for name in opts.kind_map.keys() {
        if !names.iter().enumerate().any(|(j, n)| j != label_idx && n == name) {
            return Err(DatasetError::UnknownKindMapFeature(name.clone()));
        }
    }

    let feature_cols: Vec<usize> = (0..width).filter(|&j| j != label_idx).collect();
    let specs: Vec<FeatureSpec> = feature_cols
        .iter()
        .map(|&j| FeatureSpec {
            name: names[j].clone(),
            kind: opts.kind_map.get(&names[j]).copied().unwrap_or(FeatureKind::Nutritional),
            source: ColumnSource::Delimited { index: j },
        })
        .collect();
    let p = specs.len();

    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;

    for record in pending_first.into_iter().map(Ok).chain(records) {
        let record = record.map_err(|e| DatasetError::Csv(e.to_string()))?;
        let line = line_of(&record);
        if record.len() == 1 && record.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if record.len() != width {
            return Err(DatasetError::RaggedRow { line, expected: width, found: record.len() });
        }
        let raw_label = record.get(label_idx).unwrap_or_default();
        let label = match opts.label_rule.classify(raw_label) {
            LabelDecision::Keep(l) => l,
            LabelDecision::Drop => continue,
            LabelDecision::Unknown => {
                return Err(DatasetError::UnknownLabel { line, value: raw_label.to_string() })
            }
        };
        for (&j, spec) in feature_cols.iter().zip(&specs) {
            let cell = record.get(j).unwrap_or_default().trim();
            if cell.is_empty() {
                values.push(f64::NAN);
                mask.push(true);
            } else {
                let v = cell.parse::<f64>().map_err(|_| DatasetError::NonNumeric {
                    line,
                    field: spec.name.clone(),
                    text: cell.to_string(),
                })?;
                values.push(v);
                mask.push(false);
            }
        }
        labels.push(label);
        n += 1;
    }

    if n == 0 {
        return Err(DatasetError::NoRows);
    }
    let rows = Array2::from_shape_vec((n, p), values).map_err(|e| DatasetError::Shape(e.to_string()))?;
    let missing = Array2::from_shape_vec((n, p), mask).map_err(|e| DatasetError::Shape(e.to_string()))?;
    Dataset::new(rows, labels, specs, missing)
}

/// Canonical delimited form: comma-separated, header row, trailing `label`
/// column, LF line endings, masked cells left empty.
///
/// Values use Rust's shortest round-trip float formatting, so re-parsing
/// reproduces every bit.
pub fn write_delimited(ds: &Dataset) -> String {
    let mut out = String::new();
    for spec in ds.specs() {
        out.push_str(&spec.name);
        out.push(',');
    }
    out.push_str("label\n");
    for i in 0..ds.n_rows() {
        for (j, &v) in ds.row(i).iter().enumerate() {
            if !ds.missing()[[i, j]] {
                let _ = write!(out, "{v}");
            }
            out.push(',');
        }
        let _ = writeln!(out, "{}", ds.labels()[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::apply_missing_policy;

    #[test]
    fn empty_cell_is_missing() {
        let text = "age,vbp,label\n60,500,1\n55,,0\n";
        let ds = parse_delimited(text, &DelimitedOptions::default()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.feature_names(), vec!["age", "vbp"]);
        assert!(ds.missing()[[1, 1]]);
        assert!(!ds.missing()[[0, 1]]);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(apply_missing_policy(ds).values()[[1, 1]], -1.0);
    }

    #[test]
    fn crlf_is_accepted() {
        let text = "a,label\r\n1.5,1\r\n2,0\r\n";
        let ds = parse_delimited(text, &DelimitedOptions::default()).unwrap();
        assert_eq!(ds.values()[[0, 0]], 1.5);
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn non_binary_label_is_rejected() {
        let err = parse_delimited("a,label\n1,2\n", &DelimitedOptions::default()).unwrap_err();
        assert_eq!(err, DatasetError::UnknownLabel { line: 2, value: "2".into() });
    }

    #[test]
    fn header_free_file_is_rejected_when_header_expected() {
        let err = parse_delimited("60,500,1\n55,400,0\n", &DelimitedOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::NumericHeader(_)));
    }

    #[test]
    fn header_free_mode_uses_last_column_as_label() {
        let opts = DelimitedOptions { header: false, ..Default::default() };
        let ds = parse_delimited("60,500,1\n55,400,0\n", &opts).unwrap();
        assert_eq!(ds.feature_names(), vec!["f0", "f1"]);
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = parse_delimited("a,b,label\n1,2,0\n1,0\n", &DelimitedOptions::default()).unwrap_err();
        assert_eq!(err, DatasetError::RaggedRow { line: 3, expected: 3, found: 2 });
    }

    #[test]
    fn kind_map_must_name_header_columns() {
        let mut opts = DelimitedOptions::default();
        opts.kind_map.insert("AGE".into(), FeatureKind::PhiChar);
        let err = parse_delimited("vbp,label\n1,0\n", &opts).unwrap_err();
        assert_eq!(err, DatasetError::UnknownKindMapFeature("AGE".into()));

        let ds = parse_delimited("AGE,vbp,label\n1,2,0\n", &opts).unwrap();
        assert_eq!(ds.specs()[0].kind, FeatureKind::PhiChar);
        assert_eq!(ds.specs()[1].kind, FeatureKind::Nutritional);
    }

    #[test]
    fn non_numeric_cell_reports_coordinates() {
        let err = parse_delimited("a,label\nx,1\n", &DelimitedOptions::default()).unwrap_err();
        assert_eq!(err, DatasetError::NonNumeric { line: 2, field: "a".into(), text: "x".into() });
    }

    #[test]
    fn pairing_rule_drops_other_cohorts() {
        let opts = DelimitedOptions {
            label_rule: LabelRule {
                case: vec!["AD".into()],
                control: Some(vec!["HD".into()]),
                drop_unmatched: true,
            },
            ..Default::default()
        };
        let ds = parse_delimited("a,label\n1,AD\n2,CA\n3,HD\n", &opts).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.column(0).to_vec(), vec![1.0, 3.0]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_delimited("", &DelimitedOptions::default()).unwrap_err(), DatasetError::Empty);
    }
}
