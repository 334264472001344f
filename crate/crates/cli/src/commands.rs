use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use cohortshap::dataset::{
    apply_missing_policy, generate_synthetic, plant_informative, select_feature_set, write_delimited, LabelRule,
    SyntheticSpec,
};
use cohortshap::explain::{
    exact_shap_oracle, explain_row, forest_shap, write_explanations, SamplingOptions, LOCAL_ACCURACY_TOL,
};
use cohortshap::models::{fit_model, Hyperparameters, ModelKind, TrainedModel};
use cohortshap::pipeline::{run_experiment, ExperimentConfig, ExperimentResult};
use cohortshap::{Dataset, FeatureSet};
use serde::{Deserialize, Serialize};

use crate::config::{sidecar, Overrides, ResolvedRun, RunConfig, OUT_DIR_ENV};
use crate::data::{audit_csv, kinds_json, load_delimited, load_fixed_width, load_input, summary_line};
use crate::outputs::{importance_csv, metrics_csv, render_report};

/// Features listed per experiment in `report.md`.
pub const REPORT_TOP_K: usize = 10;

/// Largest feature count for which `explain --oracle` enumerates all subsets.
pub const ORACLE_MAX_FEATURES: usize = 12;

pub fn log(start: Instant, msg: &str) {
    eprintln!("[{:>8.2}s] {msg}", start.elapsed().as_secs_f64());
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
        }
        _ => Ok(()),
    }
}

/// Write the dataset with its `.kinds.json` and `.audit.csv` sidecars.
fn write_dataset(ds: &Dataset, output: &Path) -> Result<()> {
    ensure_parent(output)?;
    write(output, &write_delimited(ds))?;
    write(&sidecar(output, "kinds.json"), &kinds_json(ds))?;
    write(&sidecar(output, "audit.csv"), &audit_csv(ds))
}

pub struct IngestArgs {
    pub input: PathBuf,
    pub layout: Option<PathBuf>,
    pub kinds: Option<PathBuf>,
    pub label_column: String,
    pub rule: LabelRule,
    pub output: PathBuf,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let start = Instant::now();
    let meta = std::fs::metadata(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    ensure!(meta.len() > 0, "input file {} is empty", args.input.display());
    let ds = match &args.layout {
        Some(layout) => load_fixed_width(&args.input, layout, &args.rule)?,
        None => load_delimited(&args.input, args.kinds.as_deref(), &BTreeMap::new(), &args.label_column, &args.rule)?,
    };
    write_dataset(&ds, &args.output)?;
    log(start, &format!("ingested {}: {}", args.input.display(), summary_line(&ds)));
    Ok(())
}

pub struct SynthArgs {
    pub cases: usize,
    pub controls: usize,
    pub nutritional: usize,
    pub phichar: usize,
    pub informative: usize,
    pub effect: f64,
    pub missing_prob: f64,
    pub seed: u64,
    pub output: PathBuf,
}

/// Ground truth written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SyntheticSpec,
    pub planted_features: Vec<String>,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let start = Instant::now();
    let spec = SyntheticSpec {
        n_cases: args.cases,
        n_controls: args.controls,
        p_nutritional: args.nutritional,
        p_phichar: args.phichar,
        informative: plant_informative(args.nutritional, args.informative, args.effect, args.seed)?,
        missing_prob: args.missing_prob,
        seed: args.seed,
    };
    let ds = generate_synthetic(&spec)?;
    let names = ds.feature_names();
    let manifest = SynthManifest {
        planted_features: spec.informative.iter().map(|e| names[e.index].clone()).collect(),
        spec,
    };
    write_dataset(&ds, &args.output)?;
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write(&sidecar(&args.output, "manifest.json"), &text)?;
    log(start, &format!("synthesized {}: {}", args.output.display(), summary_line(&ds)));
    Ok(())
}

/// A model trained on a whole dataset, with the columns it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub feature_set: FeatureSet,
    pub feature_names: Vec<String>,
    pub model: TrainedModel,
}

pub struct FitArgs {
    pub data: PathBuf,
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub n_trees: Option<usize>,
    pub seed: u64,
    pub output: PathBuf,
}

fn load_data_file(path: &Path) -> Result<Dataset> {
    let kinds = sidecar(path, "kinds.json");
    let kinds = kinds.exists().then_some(kinds);
    load_delimited(path, kinds.as_deref(), &BTreeMap::new(), "label", &LabelRule::default())
}

fn prepared(ds: &Dataset, feature_set: FeatureSet) -> Result<Dataset> {
    Ok(apply_missing_policy(select_feature_set(ds, feature_set)?))
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let ds = prepared(&load_data_file(&args.data)?, args.feature_set)?;
    let mut hyper = Hyperparameters::default();
    if let Some(n) = args.n_trees {
        hyper.forest.n_trees = n;
    }
    let model = fit_model(args.model, ds.values().view(), ds.labels(), &hyper, args.seed)?;
    let file = ModelFile { feature_set: args.feature_set, feature_names: ds.feature_names(), model };
    ensure_parent(&args.output)?;
    write(&args.output, &serde_json::to_string(&file)?)?;
    log(start, &format!("fitted {} on {} rows x {} features", args.model.display_name(), ds.n_rows(), ds.n_features()));
    Ok(())
}

pub struct ExplainArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub rows: Vec<usize>,
    pub oracle: bool,
    pub n_permutations: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

pub fn explain(args: &ExplainArgs) -> Result<()> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let file: ModelFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.model.display()))?;
    let ds = prepared(&load_data_file(&args.data)?, file.feature_set)?;
    ensure!(
        ds.feature_names() == file.feature_names,
        "{} does not have the feature columns the model was trained on",
        args.data.display()
    );
    ensure!(!args.rows.is_empty(), "no rows to explain");
    if let Some(&bad) = args.rows.iter().find(|&&r| r >= ds.n_rows()) {
        bail!("row {bad} out of range: {} has {} rows", args.data.display(), ds.n_rows());
    }

    let background = ds.values().view();
    let mut explanations = Vec::with_capacity(args.rows.len());
    for (i, &r) in args.rows.iter().enumerate() {
        let opts = SamplingOptions { n_permutations: args.n_permutations, seed: cohortshap::seed::derive_seed(args.seed, &[i as u64]) };
        let e = explain_row(&file.model, ds.row(r), background, &opts).with_context(|| format!("explaining row {r}"))?;
        explanations.push((r, e));
    }
    let worst = explanations.iter().map(|(_, e)| e.local_accuracy_gap()).fold(0.0, f64::max);
    ensure!(worst < LOCAL_ACCURACY_TOL, "local accuracy gap {worst:e} exceeds {LOCAL_ACCURACY_TOL:e}");
    log(start, &format!("explained {} rows; max local accuracy gap {worst:e}", explanations.len()));

    if args.oracle {
        let TrainedModel::Forest { forest } = &file.model else { bail!("--oracle needs a forest model") };
        ensure!(
            ds.n_features() <= ORACLE_MAX_FEATURES,
            "--oracle enumerates all subsets and is limited to {ORACLE_MAX_FEATURES} features; the model has {}",
            ds.n_features()
        );
        let mut deviation: f64 = 0.0;
        for &(r, _) in &explanations {
            let fast = forest_shap(forest, ds.row(r))?;
            let exact = exact_shap_oracle(forest.trees(), ds.row(r))?;
            for (a, b) in fast.contributions().iter().zip(exact.contributions()) {
                deviation = deviation.max((a - b).abs());
            }
        }
        println!("max |tree_shap - oracle| = {deviation:e}");
    }

    let dump = write_explanations(&explanations, &ds.feature_names());
    match &args.output {
        Some(path) => {
            ensure_parent(path)?;
            write(path, &dump)
        }
        None => {
            print!("{dump}");
            Ok(())
        }
    }
}

pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
}

pub const RUN_OUTPUTS: [&str; 4] = ["metrics.csv", "importance.csv", "report.md", "manifest.json"];

pub fn resolve_run(args: &RunArgs) -> Result<ResolvedRun> {
    let config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let env_dir = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    config.resolve(args.overrides.clone(), env_dir)
}

/// Every requested (model, feature set) experiment, in manifest order.
pub fn execute(run: &ResolvedRun, start: Instant) -> Result<Vec<(ExperimentConfig, ExperimentResult)>> {
    let ds = load_input(&run.input, &run.config.pairing.rule)?;
    log(start, &format!("loaded {}", summary_line(&ds)));
    let mut results = Vec::new();
    for e in run.config.experiments(run.seed) {
        let label = format!("{} / {}", e.model.display_name(), e.feature_set.display_name());
        let r = run_experiment(&ds, &e).with_context(|| format!("experiment {label}"))?;
        log(start, &format!("{label}: {} cells, accuracy {:.1}%", r.cells.len(), r.summary.accuracy.mean));
        results.push((e, r));
    }
    Ok(results)
}

pub fn run(args: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let resolved = resolve_run(args)?;
    let results = execute(&resolved, start)?;

    let metrics = metrics_csv(&results);
    let importance = importance_csv(&results);
    let report = render_report(&metrics, &importance, REPORT_TOP_K)?;
    let contents = [metrics, importance, report, resolved.manifest_json()];

    let dir = &resolved.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, text) in RUN_OUTPUTS.iter().zip(&contents) {
        let path = dir.join(name);
        if let Err(e) = write(&path, text) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    log(start, &format!("wrote {}", dir.display()));
    Ok(())
}

pub fn report(dir: &Path, output: Option<&Path>) -> Result<()> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    };
    let text = render_report(&read("metrics.csv")?, &read("importance.csv")?, REPORT_TOP_K)?;
    match output {
        Some(path) => write(path, &text),
        None => write(&dir.join("report.md"), &text),
    }
}
