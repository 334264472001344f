//! Command-line front end: ingestion, synthetic cohorts, experiment runs,
//! per-row explanations and report rendering.

pub mod commands;
pub mod config;
pub mod data;
pub mod outputs;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cohortshap::dataset::LabelRule;
use cohortshap::models::ModelKind;
use cohortshap::FeatureSet;

use crate::commands::{ExplainArgs, FitArgs, IngestArgs, RunArgs, SynthArgs};
use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "cohortshap", version, about = "Explainable classification of imbalanced cohorts")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a delimited or fixed-width file into the canonical CSV plus missingness audit.
    Ingest(IngestCmd),
    /// Generate a synthetic cohort with planted informative features.
    Synth(SynthCmd),
    /// Train one model on a whole dataset and save it as JSON.
    Fit(FitCmd),
    /// Run the resampled experiments and write metrics, importance and report.
    Run(RunCmd),
    /// Explain individual rows of a dataset with a saved model.
    Explain(ExplainCmd),
    /// Re-render report.md from the CSVs of a previous run.
    Report(ReportCmd),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Outcome codes counted as cases (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub case: Vec<String>,
    /// Outcome codes counted as controls; `any` means every non-case row.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub control: Vec<String>,
    /// Drop rows whose outcome matches neither side instead of failing.
    #[arg(long)]
    pub drop_unmatched: bool,
}

impl LabelArgs {
    fn rule(&self) -> LabelRule {
        let control = (self.control != ["any"]).then(|| self.control.clone());
        LabelRule { case: self.case.clone(), control, drop_unmatched: self.drop_unmatched }
    }
}

#[derive(Debug, Args)]
pub struct IngestCmd {
    #[arg(long)]
    pub input: PathBuf,
    /// Fixed-width layout JSON; without it the input is read as CSV.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// JSON object mapping CSV column names to `phichar` or `nutritional`.
    #[arg(long, conflicts_with = "layout")]
    pub kinds: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    pub cases: usize,
    #[arg(long)]
    pub controls: usize,
    #[arg(long, default_value_t = 93)]
    pub nutritional: usize,
    #[arg(long, default_value_t = 12)]
    pub phichar: usize,
    /// Number of nutritional features given a case-mean shift.
    #[arg(long, default_value_t = 0)]
    pub informative: usize,
    /// Shift of the informative features in standard deviations.
    #[arg(long, default_value_t = 1.0)]
    pub effect: f64,
    #[arg(long, default_value_t = 0.0)]
    pub missing_prob: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "forest")]
    pub model: ModelKind,
    #[arg(long, default_value = "nutritional")]
    pub feature_set: FeatureSet,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Canonical CSV input (replaces the configured input).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    pub feature_sets: Option<Vec<FeatureSet>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_random_states: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub n_permutations: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Row indices (0-based, comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub rows: Vec<usize>,
    /// Compare TreeSHAP against full subset enumeration (forests with at most 12 features).
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 64)]
    pub n_permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the explanation CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportCmd {
    /// Directory holding metrics.csv and importance.csv.
    #[arg(long)]
    pub dir: PathBuf,
    /// Destination (default: report.md in the same directory).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(c) => commands::ingest(&IngestArgs {
            rule: c.labels.rule(),
            input: c.input,
            layout: c.layout,
            kinds: c.kinds,
            label_column: c.label_column,
            output: c.output,
        }),
        Command::Synth(c) => commands::synth(&SynthArgs {
            cases: c.cases,
            controls: c.controls,
            nutritional: c.nutritional,
            phichar: c.phichar,
            informative: c.informative,
            effect: c.effect,
            missing_prob: c.missing_prob,
            seed: c.seed,
            output: c.output,
        }),
        Command::Fit(c) => commands::fit(&FitArgs {
            data: c.data,
            model: c.model,
            feature_set: c.feature_set,
            n_trees: c.n_trees,
            seed: c.seed,
            output: c.output,
        }),
        Command::Run(c) => commands::run(&RunArgs {
            config: c.config,
            overrides: Overrides {
                input: c.input,
                models: c.models,
                feature_sets: c.feature_sets,
                k: c.k,
                n_random_states: c.n_random_states,
                seed: c.seed,
                n_trees: c.n_trees,
                n_permutations: c.n_permutations,
                output_dir: c.output_dir,
            },
        }),
        Command::Explain(c) => commands::explain(&ExplainArgs {
            model: c.model,
            data: c.data,
            rows: c.rows,
            oracle: c.oracle,
            n_permutations: c.n_permutations,
            seed: c.seed,
            output: c.output,
        }),
        Command::Report(c) => commands::report(&c.dir, c.output.as_deref()),
    }
}

/// Run a parsed command line on a worker pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        anyhow::ensure!(n > 0, "--workers must be at least 1");
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building worker pool")?;
    pool.install(|| dispatch(cli.command))
}
