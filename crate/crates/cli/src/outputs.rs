//! The run's CSV outputs and the markdown report rendered from them.
//!
//! The report is always rendered from the parsed CSV text, never from the
//! in-memory results, so `report` reproduces `run`'s `report.md` exactly.

use anyhow::{bail, Context, Result};
use cohortshap::models::ModelKind;
use cohortshap::pipeline::{format_mean_std, format_weight, ExperimentConfig, ExperimentResult};
use cohortshap::FeatureSet;

const METRICS_HEADER: [&str; 12] = [
    "model",
    "feature_set",
    "row",
    "subgroup",
    "fold",
    "state",
    "evaluations",
    "accuracy",
    "precision",
    "recall",
    "precision_degenerate",
    "recall_degenerate",
];

const IMPORTANCE_HEADER: [&str; 5] = ["model", "feature_set", "rank", "feature", "weight"];

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

/// One row per cell (values in percent) followed by `mean` and `std` rows per experiment.
pub fn metrics_csv(runs: &[(ExperimentConfig, ExperimentResult)]) -> String {
    let mut w = writer();
    w.write_record(METRICS_HEADER).expect("in-memory write");
    for (config, result) in runs {
        let (model, fs) = (config.model.as_str(), config.feature_set.as_str());
        for cell in &result.cells {
            let m = &cell.metrics;
            w.write_record([
                model.to_string(),
                fs.to_string(),
                "cell".into(),
                cell.coord.subgroup.to_string(),
                cell.coord.fold.to_string(),
                cell.coord.state.to_string(),
                "1".into(),
                (m.accuracy * 100.0).to_string(),
                (m.precision * 100.0).to_string(),
                (m.recall * 100.0).to_string(),
                u8::from(m.precision_degenerate).to_string(),
                u8::from(m.recall_degenerate).to_string(),
            ])
            .expect("in-memory write");
        }
        let s = &result.summary;
        for (row, a, p, r) in [
            ("mean", s.accuracy.mean, s.precision.mean, s.recall.mean),
            ("std", s.accuracy.std, s.precision.std, s.recall.std),
        ] {
            w.write_record([
                model.to_string(),
                fs.to_string(),
                row.into(),
                String::new(),
                String::new(),
                String::new(),
                s.count.to_string(),
                a.to_string(),
                p.to_string(),
                r.to_string(),
                s.degenerate_precision.to_string(),
                s.degenerate_recall.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

/// Every feature of every experiment with its rank and weight in percent.
pub fn importance_csv(runs: &[(ExperimentConfig, ExperimentResult)]) -> String {
    let mut w = writer();
    w.write_record(IMPORTANCE_HEADER).expect("in-memory write");
    for (config, result) in runs {
        for (i, e) in result.report.entries.iter().enumerate() {
            w.write_record([
                config.model.as_str().to_string(),
                config.feature_set.as_str().to_string(),
                (i + 1).to_string(),
                e.name.clone(),
                e.weight.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub evaluations: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub degenerate_precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceTable {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub entries: Vec<(String, f64)>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().from_reader(text.as_bytes())
}

fn check_header(r: &mut csv::Reader<&[u8]>, expected: &[&str], what: &str) -> Result<()> {
    let header = r.headers().with_context(|| format!("reading {what} header"))?;
    if header.iter().ne(expected.iter().copied()) {
        bail!("{what} header is `{}`, expected `{}`", header.iter().collect::<Vec<_>>().join(","), expected.join(","));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| anyhow::anyhow!("line {line}: bad {what} `{s}`: {e}"))
}

/// Summary rows of `metrics.csv`, in file order.
pub fn parse_metrics(text: &str) -> Result<Vec<SummaryRow>> {
    let mut r = reader(text);
    check_header(&mut r, &METRICS_HEADER, "metrics.csv")?;
    let mut rows: Vec<SummaryRow> = Vec::new();
    for rec in r.records() {
        let rec = rec.context("reading metrics.csv")?;
        let line = rec.position().map_or(0, |p| p.line());
        let kind = &rec[2];
        if kind == "cell" {
            continue;
        }
        let model: ModelKind = parse(&rec[0], "model", line)?;
        let feature_set: FeatureSet = parse(&rec[1], "feature set", line)?;
        let values = [parse(&rec[7], "accuracy", line)?, parse(&rec[8], "precision", line)?, parse(&rec[9], "recall", line)?];
        match kind {
            "mean" => rows.push(SummaryRow {
                model,
                feature_set,
                evaluations: parse(&rec[6], "evaluations", line)?,
                mean: values,
                std: [f64::NAN; 3],
                degenerate_precision: parse(&rec[10], "degenerate count", line)?,
            }),
            "std" => match rows.last_mut() {
                Some(last) if last.model == model && last.feature_set == feature_set => last.std = values,
                _ => bail!("line {line}: std row without a preceding mean row"),
            },
            other => bail!("line {line}: unknown row type `{other}`"),
        }
    }
    if let Some(row) = rows.iter().find(|r| r.std.iter().any(|v| v.is_nan())) {
        bail!("metrics.csv: {} / {} has no std row", row.model.as_str(), row.feature_set.as_str());
    }
    Ok(rows)
}

/// Tables of `importance.csv`, in file order.
pub fn parse_importance(text: &str) -> Result<Vec<ImportanceTable>> {
    let mut r = reader(text);
    check_header(&mut r, &IMPORTANCE_HEADER, "importance.csv")?;
    let mut tables: Vec<ImportanceTable> = Vec::new();
    for rec in r.records() {
        let rec = rec.context("reading importance.csv")?;
        let line = rec.position().map_or(0, |p| p.line());
        let model: ModelKind = parse(&rec[0], "model", line)?;
        let feature_set: FeatureSet = parse(&rec[1], "feature set", line)?;
        let weight: f64 = parse(&rec[4], "weight", line)?;
        match tables.last_mut() {
            Some(t) if t.model == model && t.feature_set == feature_set => t.entries.push((rec[3].to_string(), weight)),
            _ => tables.push(ImportanceTable { model, feature_set, entries: vec![(rec[3].to_string(), weight)] }),
        }
    }
    Ok(tables)
}

/// Markdown tables: the model comparison grid, then the top-`top_k` features per experiment.
pub fn render_report(metrics_text: &str, importance_text: &str, top_k: usize) -> Result<String> {
    let rows = parse_metrics(metrics_text)?;
    let tables = parse_importance(importance_text)?;
    let mut out = String::from("# Classification results\n\nScores are mean(standard deviation) in percent over all evaluations.\n\n");
    out.push_str("| ML method | Feature type | Accuracy | Precision | Recall | Evaluations |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in &rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            r.model.display_name(),
            r.feature_set.display_name(),
            format_mean_std(r.mean[0], r.std[0]),
            format_mean_std(r.mean[1], r.std[1]),
            format_mean_std(r.mean[2], r.std[2]),
            r.evaluations,
        ));
    }
    for r in rows.iter().filter(|r| r.degenerate_precision > 0) {
        out.push_str(&format!(
            "\n{} / {}: no positive predictions in {} of {} evaluations (precision counted as 0).\n",
            r.model.display_name(),
            r.feature_set.display_name(),
            r.degenerate_precision,
            r.evaluations
        ));
    }
    for t in &tables {
        out.push_str(&format!("\n## Feature importance: {}, {}\n\n", t.model.display_name(), t.feature_set.display_name()));
        out.push_str("| Rank | Feature | Weight (%) |\n|---|---|---|\n");
        for (i, (name, w)) in t.entries.iter().take(top_k).enumerate() {
            out.push_str(&format!("| {} | {} | {} |\n", i + 1, name, format_weight(*w)));
        }
    }
    Ok(out)
}
