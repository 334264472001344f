use ndarray::Axis;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{kfold_split, make_balanced_subgroups, SubgroupPlan};
use super::{aggregate_importance, evaluate_fold, FoldMetrics, MetricSummary, PipelineError, RankedImportanceReport, Result};
use crate::dataset::{apply_missing_policy, select_feature_set, Dataset, FeatureSet};
use crate::explain::{mean_abs_shap, ExplainError, ImportanceVector, SamplingOptions};
use crate::models::{fit_model, Hyperparameters, ModelKind};
use crate::seed::{self, tags};

/// One model family on one feature list, evaluated over every
/// (subgroup, fold, random state) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Free-form name of the case/control pairing, echoed in outputs.
    pub pairing: String,
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub k: usize,
    pub n_random_states: usize,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    /// Permutations per explained row for non-tree models.
    pub n_permutations: usize,
    /// Replace the training cases of every cell by a bootstrap resample.
    pub bootstrap_minority: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pairing: "case-vs-control".into(),
            model: ModelKind::Forest,
            feature_set: FeatureSet::Nutritional,
            k: 10,
            n_random_states: 1,
            seed: 0,
            hyperparameters: Hyperparameters::default(),
            n_permutations: SamplingOptions::default().n_permutations,
            bootstrap_minority: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(PipelineError::InvalidConfig(format!("k = {} must be at least 2", self.k)));
        }
        if self.n_random_states == 0 {
            return Err(PipelineError::InvalidConfig("n_random_states must be at least 1".into()));
        }
        if self.n_permutations == 0 {
            return Err(PipelineError::InvalidConfig("n_permutations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub subgroup: usize,
    pub fold: usize,
    pub state: usize,
}

/// All cells in coordinate order (subgroup, then fold, then state).
pub fn plan_cells(n_subgroups: usize, k: usize, n_random_states: usize) -> Vec<CellCoord> {
    let mut cells = Vec::with_capacity(n_subgroups * k * n_random_states);
    for subgroup in 0..n_subgroups {
        for fold in 0..k {
            for state in 0..n_random_states {
                cells.push(CellCoord { subgroup, fold, state });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub coord: CellCoord,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: FoldMetrics,
    pub importance: ImportanceVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub feature_names: Vec<String>,
    pub plan: SubgroupPlan,
    pub cells: Vec<CellResult>,
    pub summary: MetricSummary,
    pub report: RankedImportanceReport,
}

impl ExperimentResult {
    pub fn importance_vectors(&self) -> Vec<ImportanceVector> {
        self.cells.iter().map(|c| c.importance.clone()).collect()
    }
}

/// Run every cell of the configured experiment.
///
/// Seeds: subgroups from `(seed, SUBGROUP)`, folds of subgroup `g` from
/// `(seed, FOLD, g)`, the model of cell `(g, f, s)` from `(seed, CELL, g, f, s)`.
/// Cells run concurrently on the current rayon pool; results are collected in
/// coordinate order, so the output does not depend on the pool size.
pub fn run_experiment(ds: &Dataset, config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let ds = apply_missing_policy(select_feature_set(ds, config.feature_set)?);
    let plan = make_balanced_subgroups(ds.labels(), seed::derive_seed(config.seed, &[tags::SUBGROUP]))?;
    let folds = (0..plan.n_subgroups())
        .map(|g| kfold_split(&plan.subgroup_indices(g), ds.labels(), config.k, seed::derive_seed(config.seed, &[tags::FOLD, g as u64])))
        .collect::<Result<Vec<_>>>()?;

    let cells = plan_cells(plan.n_subgroups(), config.k, config.n_random_states)
        .into_par_iter()
        .map(|coord| run_cell(&ds, &folds[coord.subgroup], coord, config))
        .collect::<Result<Vec<_>>>()?;

    let metrics: Vec<FoldMetrics> = cells.iter().map(|c| c.metrics).collect();
    let summary = MetricSummary::from_folds(&metrics)?;
    let vectors: Vec<ImportanceVector> = cells.iter().map(|c| c.importance.clone()).collect();
    let report = aggregate_importance(&vectors, &ds.feature_names())?;
    Ok(ExperimentResult { feature_names: ds.feature_names(), plan, cells, summary, report })
}

fn run_cell(ds: &Dataset, folds: &[Vec<usize>], coord: CellCoord, config: &ExperimentConfig) -> Result<CellResult> {
    let annotate = |source: ExplainError| PipelineError::Cell { subgroup: coord.subgroup, fold: coord.fold, state: coord.state, source };
    let test = &folds[coord.fold];
    let mut train: Vec<usize> = folds.iter().enumerate().filter(|&(f, _)| f != coord.fold).flat_map(|(_, idx)| idx.iter().copied()).collect();
    train.sort_unstable();

    let cell_seed = seed::derive_seed(config.seed, &[tags::CELL, coord.subgroup as u64, coord.fold as u64, coord.state as u64]);
    if config.bootstrap_minority {
        let labels = ds.labels();
        let cases: Vec<usize> = train.iter().copied().filter(|&i| labels[i] == 1).collect();
        let mut rng = seed::stream(cell_seed, &[tags::MINORITY_BOOTSTRAP]);
        let resampled: Vec<usize> = (0..cases.len()).map(|_| cases[rng.random_range(0..cases.len())]).collect();
        train.retain(|&i| labels[i] == 0);
        train.extend(resampled);
        train.sort_unstable();
    }

    let x_train = ds.values().select(Axis(0), &train);
    let y_train: Vec<u8> = train.iter().map(|&i| ds.labels()[i]).collect();
    let x_test = ds.values().select(Axis(0), test);
    let y_test: Vec<u8> = test.iter().map(|&i| ds.labels()[i]).collect();

    let model = fit_model(config.model, x_train.view(), &y_train, &config.hyperparameters, cell_seed).map_err(|e| annotate(e.into()))?;
    let predictions = x_test
        .rows()
        .into_iter()
        .map(|r| model.predict_label(&r.to_vec()))
        .collect::<std::result::Result<Vec<u8>, _>>()
        .map_err(|e| annotate(e.into()))?;
    let metrics = evaluate_fold(&predictions, &y_test)?;

    let opts = SamplingOptions { n_permutations: config.n_permutations, seed: seed::derive_seed(cell_seed, &[tags::EXPLAIN]) };
    let importance = mean_abs_shap(&model, x_test.view(), x_train.view(), &opts).map_err(annotate)?;
    Ok(CellResult { coord, n_train: train.len(), n_test: test.len(), metrics, importance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, PlantedEffect, SyntheticSpec};
    use crate::models::ForestParams;

    fn small_cohort() -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n_cases: 30,
            n_controls: 95,
            p_nutritional: 4,
            p_phichar: 2,
            informative: vec![PlantedEffect { index: 1, effect: 2.0 }],
            missing_prob: 0.05,
            seed: 3,
        })
        .unwrap()
    }

    fn quick(model: ModelKind) -> ExperimentConfig {
        let mut c = ExperimentConfig { model, feature_set: FeatureSet::Both, k: 5, seed: 11, n_permutations: 8, ..Default::default() };
        c.hyperparameters.forest = ForestParams { n_trees: 10, ..Default::default() };
        c
    }

    #[test]
    fn cell_count_contract() {
        let mut config = quick(ModelKind::Forest);
        config.n_random_states = 2;
        let r = run_experiment(&small_cohort(), &config).unwrap();
        // floor(95 / 30) = 3 subgroups
        assert_eq!(r.plan.n_subgroups(), 3);
        assert_eq!(r.plan.discarded.len(), 5);
        assert_eq!(r.cells.len(), 3 * 5 * 2);
        assert_eq!(r.summary.count, 30);
        assert_eq!(r.cells.iter().map(|c| c.coord).collect::<Vec<_>>(), plan_cells(3, 5, 2));
        for c in &r.cells {
            assert_eq!(c.n_train + c.n_test, 60);
        }
    }

    #[test]
    fn every_family_runs_and_finds_the_planted_feature() {
        for kind in ModelKind::ALL {
            let r = run_experiment(&small_cohort(), &quick(kind)).unwrap();
            assert!(r.summary.accuracy.mean > 70.0, "{kind:?}: {}", r.summary.accuracy.mean);
            assert_eq!(r.report.entries[0].name, "NUT002", "{kind:?}");
        }
    }

    #[test]
    fn pool_size_does_not_change_results() {
        let config = quick(ModelKind::Mlp);
        let ds = small_cohort();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_experiment(&ds, &config)).unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_experiment(&ds, &config)).unwrap();
        assert_eq!(serial, wide);
    }

    #[test]
    fn bootstrap_minority_keeps_training_size() {
        let mut config = quick(ModelKind::Forest);
        config.bootstrap_minority = true;
        let r = run_experiment(&small_cohort(), &config).unwrap();
        assert!(r.cells.iter().all(|c| c.n_train == 48));
    }

    #[test]
    fn invalid_config() {
        let config = ExperimentConfig { k: 1, ..Default::default() };
        assert!(matches!(run_experiment(&small_cohort(), &config), Err(PipelineError::InvalidConfig(_))));
    }
}
