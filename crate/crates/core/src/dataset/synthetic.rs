use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{apply_missing_policy, ColumnSource, Dataset, DatasetError, FeatureKind, FeatureSpec, Result};
use crate::seed::{self, tags};

/// A feature whose case-class mean is shifted by `effect` standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub index: usize,
    pub effect: f64,
}

/// Recipe for a synthetic cohort with known ground truth.
///
/// Columns are the nutritional features (`NUT001`, ...) followed by the
/// physical-characteristic features (`PHI01`, ...); rows are the cases
/// followed by the controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_cases: usize,
    pub n_controls: usize,
    pub p_nutritional: usize,
    pub p_phichar: usize,
    #[serde(default)]
    pub informative: Vec<PlantedEffect>,
    #[serde(default)]
    pub missing_prob: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.p_nutritional + self.p_phichar
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DatasetError::InvalidSynthetic(msg));
        if self.n_cases + self.n_controls == 0 {
            return bad("no rows requested".into());
        }
        if self.n_features() == 0 {
            return bad("no features requested".into());
        }
        for e in &self.informative {
            if e.index >= self.n_features() {
                return bad(format!("informative index {} >= {} features", e.index, self.n_features()));
            }
            if !e.effect.is_finite() {
                return bad(format!("effect size for feature {} is not finite", e.index));
            }
        }
        if !(0.0..1.0).contains(&self.missing_prob) {
            return bad(format!("missing probability {} outside [0, 1)", self.missing_prob));
        }
        Ok(())
    }

    pub fn feature_specs(&self) -> Vec<FeatureSpec> {
        let nut = (0..self.p_nutritional).map(|i| (format!("NUT{:03}", i + 1), FeatureKind::Nutritional));
        let phi = (0..self.p_phichar).map(|i| (format!("PHI{:02}", i + 1), FeatureKind::PhiChar));
        nut.chain(phi)
            .enumerate()
            .map(|(index, (name, kind))| FeatureSpec { name, kind, source: ColumnSource::Delimited { index } })
            .collect()
    }
}

/// `count` distinct nutritional columns, chosen by the planted-index stream of
/// `seed` and returned in increasing order, each shifted by `effect`.
pub fn plant_informative(p_nutritional: usize, count: usize, effect: f64, seed: u64) -> Result<Vec<PlantedEffect>> {
    if count > p_nutritional {
        return Err(DatasetError::InvalidSynthetic(format!("{count} informative features requested from {p_nutritional} nutritional")));
    }
    let mut rng = seed::stream(seed, &[tags::PLANTED]);
    let mut indices = rand::seq::index::sample(&mut rng, p_nutritional, count).into_vec();
    indices.sort_unstable();
    Ok(indices.into_iter().map(|index| PlantedEffect { index, effect }).collect())
}

/// Unit-variance Gaussian features, mean-shifted in cases on the planted
/// columns, independently masked with `missing_prob`, sentinel applied.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_cases + spec.n_controls;
    let p = spec.n_features();
    let mut shift = vec![0.0; p];
    for e in &spec.informative {
        shift[e.index] += e.effect;
    }

    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < spec.n_cases)).collect();
    let mut value_rng = seed::stream(spec.seed, &[tags::SYNTH_VALUES]);
    let mut mask_rng = seed::stream(spec.seed, &[tags::SYNTH_MASK]);

    let mut rows = Array2::zeros((n, p));
    let mut missing = Array2::from_elem((n, p), false);
    for i in 0..n {
        for j in 0..p {
            let z: f64 = value_rng.sample(StandardNormal);
            rows[[i, j]] = if labels[i] == 1 { z + shift[j] } else { z };
            missing[[i, j]] = spec.missing_prob > 0.0 && mask_rng.random::<f64>() < spec.missing_prob;
        }
    }
    Ok(apply_missing_policy(Dataset::new(rows, labels, spec.feature_specs(), missing)?))
}
