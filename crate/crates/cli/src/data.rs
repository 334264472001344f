//! Dataset loading and the files that travel with a dataset.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use cohortshap::dataset::{
    generate_synthetic, parse_delimited, parse_fixed_width, DelimitedOptions, FeatureKind, LabelRule, LayoutSpec,
};
use cohortshap::Dataset;

use crate::config::InputSource;

pub fn read_kinds(path: &Path) -> Result<BTreeMap<String, FeatureKind>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading kinds file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing kinds file {}", path.display()))
}

pub fn kinds_json(ds: &Dataset) -> String {
    let map: BTreeMap<&str, FeatureKind> = ds.specs().iter().map(|s| (s.name.as_str(), s.kind)).collect();
    let mut text = serde_json::to_string_pretty(&map).expect("map serializes");
    text.push('\n');
    text
}

pub fn load_delimited(path: &Path, kinds: Option<&Path>, extra: &BTreeMap<String, FeatureKind>, label_column: &str, rule: &LabelRule) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut kind_map = match kinds {
        Some(k) => read_kinds(k)?,
        None => BTreeMap::new(),
    };
    kind_map.extend(extra.iter().map(|(k, v)| (k.clone(), *v)));
    let opts = DelimitedOptions { kind_map, label_column: label_column.to_string(), label_rule: rule.clone(), ..Default::default() };
    parse_delimited(&text, &opts).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_fixed_width(path: &Path, layout: &Path, rule: &LabelRule) -> Result<Dataset> {
    let layout_text = std::fs::read_to_string(layout).with_context(|| format!("reading layout {}", layout.display()))?;
    let layout_spec = LayoutSpec::from_json(&layout_text).map_err(anyhow::Error::msg).with_context(|| format!("parsing layout {}", layout.display()))?;
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_fixed_width(&bytes, &layout_spec, rule).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_input(input: &InputSource, rule: &LabelRule) -> Result<Dataset> {
    match input {
        InputSource::Delimited { path, kinds, kind_map, label_column } => load_delimited(path, kinds.as_deref(), kind_map, label_column, rule),
        InputSource::FixedWidth { path, layout } => load_fixed_width(path, layout, rule),
        InputSource::Synthetic { spec } => generate_synthetic(spec).context("generating synthetic cohort"),
    }
}

/// Per-feature missingness: `feature,kind,missing,rows,fraction`.
pub fn audit_csv(ds: &Dataset) -> String {
    let n = ds.n_rows();
    let mut out = String::from("feature,kind,missing,rows,fraction\n");
    for (spec, m) in ds.specs().iter().zip(ds.missing_by_feature()) {
        let kind = match spec.kind {
            FeatureKind::PhiChar => "phichar",
            FeatureKind::Nutritional => "nutritional",
        };
        out.push_str(&format!("{},{kind},{m},{n},{}\n", spec.name, m as f64 / n as f64));
    }
    out
}

/// One-line human summary for the log.
pub fn summary_line(ds: &Dataset) -> String {
    let (cases, controls) = ds.class_counts();
    let cells = ds.n_rows() * ds.n_features();
    let missing = ds.missing_count();
    format!(
        "{} rows ({cases} cases, {controls} controls), {} features, {missing} of {cells} cells missing ({:.2}%)",
        ds.n_rows(),
        ds.n_features(),
        100.0 * missing as f64 / cells as f64
    )
}
