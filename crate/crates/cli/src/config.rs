//! Run configuration: the JSON file, flag overrides and the resolved manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cohortshap::dataset::{FeatureKind, LabelRule, SyntheticSpec};
use cohortshap::models::{Hyperparameters, ModelKind};
use cohortshap::pipeline::ExperimentConfig;
use cohortshap::FeatureSet;
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "COHORTSHAP_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum InputSource {
    Delimited {
        path: PathBuf,
        /// JSON object mapping feature name to kind.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kinds: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        kind_map: BTreeMap<String, FeatureKind>,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    FixedWidth {
        path: PathBuf,
        layout: PathBuf,
    },
    Synthetic {
        spec: SyntheticSpec,
    },
}

fn default_label_column() -> String {
    "label".into()
}

/// Which outcome codes are cases and which are controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub name: String,
    #[serde(flatten)]
    pub rule: LabelRule,
}

impl Default for Pairing {
    fn default() -> Self {
        Pairing { name: "case-vs-control".into(), rule: LabelRule::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<InputSource>,
    pub pairing: Pairing,
    pub models: Vec<ModelKind>,
    pub feature_sets: Vec<FeatureSet>,
    pub k: usize,
    pub n_random_states: usize,
    pub seed: Option<u64>,
    pub hyperparameters: Hyperparameters,
    pub n_permutations: usize,
    pub bootstrap_minority: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        RunConfig {
            input: None,
            pairing: Pairing::default(),
            models: vec![ModelKind::Forest],
            feature_sets: vec![FeatureSet::Nutritional],
            k: base.k,
            n_random_states: base.n_random_states,
            seed: None,
            hyperparameters: base.hyperparameters,
            n_permutations: base.n_permutations,
            bootstrap_minority: base.bootstrap_minority,
            output_dir: None,
        }
    }
}

/// Values given on the command line; each one that is set wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub models: Option<Vec<ModelKind>>,
    pub feature_sets: Option<Vec<FeatureSet>>,
    pub k: Option<usize>,
    pub n_random_states: Option<usize>,
    pub seed: Option<u64>,
    pub n_trees: Option<usize>,
    pub n_permutations: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

/// A configuration with every choice fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub input: InputSource,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Read a config file; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.input = config.input.map(|i| i.rebased(base));
        if let Some(dir) = &config.output_dir {
            config.output_dir = Some(join(base, dir));
        }
        Ok(config)
    }

    /// Merge flags and the environment: file < `COHORTSHAP_OUT_DIR` < flags.
    pub fn resolve(mut self, flags: Overrides, env_out_dir: Option<PathBuf>) -> Result<ResolvedRun> {
        if let Some(path) = flags.input {
            self.input = Some(InputSource::Delimited { path, kinds: None, kind_map: BTreeMap::new(), label_column: default_label_column() });
        }
        if let Some(m) = flags.models {
            self.models = m;
        }
        if let Some(f) = flags.feature_sets {
            self.feature_sets = f;
        }
        if let Some(k) = flags.k {
            self.k = k;
        }
        if let Some(n) = flags.n_random_states {
            self.n_random_states = n;
        }
        if let Some(s) = flags.seed {
            self.seed = Some(s);
        }
        if let Some(n) = flags.n_trees {
            self.hyperparameters.forest.n_trees = n;
        }
        if let Some(n) = flags.n_permutations {
            self.n_permutations = n;
        }
        if let Some(dir) = env_out_dir {
            self.output_dir = Some(dir);
        }
        if let Some(dir) = flags.output_dir {
            self.output_dir = Some(dir);
        }

        let Some(input) = self.input.clone() else { bail!("no input: give --input or an `input` entry in the config") };
        let input = input.with_sidecar_kinds();
        self.input = Some(input.clone());
        let Some(seed) = self.seed else { bail!("no master seed: give --seed or a `seed` entry in the config") };
        let Some(output_dir) = self.output_dir.clone() else {
            bail!("no output directory: give --output-dir, set {OUT_DIR_ENV}, or add `output_dir` to the config")
        };
        if self.models.is_empty() || self.feature_sets.is_empty() {
            bail!("at least one model and one feature set are required");
        }
        for (g, e) in self.experiments(seed).iter().enumerate() {
            e.validate().with_context(|| format!("experiment {g}"))?;
        }
        Ok(ResolvedRun { config: self, input, seed, output_dir })
    }

    /// One experiment per (model, feature set), models outermost.
    pub fn experiments(&self, seed: u64) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &model in &self.models {
            for &feature_set in &self.feature_sets {
                out.push(ExperimentConfig {
                    pairing: self.pairing.name.clone(),
                    model,
                    feature_set,
                    k: self.k,
                    n_random_states: self.n_random_states,
                    seed,
                    hyperparameters: self.hyperparameters.clone(),
                    n_permutations: self.n_permutations,
                    bootstrap_minority: self.bootstrap_minority,
                });
            }
        }
        out
    }
}

impl ResolvedRun {
    /// The manifest: the resolved configuration as pretty JSON.
    pub fn manifest_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.config).expect("config serializes");
        text.push('\n');
        text
    }
}

fn join(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `data.csv` -> `data.<suffix>` next to it.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

impl InputSource {
    fn rebased(self, base: &Path) -> InputSource {
        match self {
            InputSource::Delimited { path, kinds, kind_map, label_column } => InputSource::Delimited {
                path: join(base, &path),
                kinds: kinds.map(|k| join(base, &k)),
                kind_map,
                label_column,
            },
            InputSource::FixedWidth { path, layout } => InputSource::FixedWidth { path: join(base, &path), layout: join(base, &layout) },
            s @ InputSource::Synthetic { .. } => s,
        }
    }

    /// Pick up `<stem>.kinds.json` written by `ingest`/`synth` when no kinds file is named.
    fn with_sidecar_kinds(self) -> InputSource {
        match self {
            InputSource::Delimited { path, kinds: None, kind_map, label_column } => {
                let candidate = sidecar(&path, "kinds.json");
                let kinds = candidate.exists().then_some(candidate);
                InputSource::Delimited { path, kinds, kind_map, label_column }
            }
            other => other,
        }
    }
}
