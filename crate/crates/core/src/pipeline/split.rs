use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::seed::{self, tags};

/// Every case paired with each of `N` equal-size, disjoint blocks of controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupPlan {
    pub minority: Vec<usize>,
    pub partitions: Vec<Vec<usize>>,
    /// Controls left over after cutting the last full block.
    pub discarded: Vec<usize>,
    pub seed: u64,
}

impl SubgroupPlan {
    pub fn n_subgroups(&self) -> usize {
        self.partitions.len()
    }

    /// Row indices of subgroup `g`: the cases followed by block `g`.
    pub fn subgroup_indices(&self, g: usize) -> Vec<usize> {
        self.minority.iter().chain(&self.partitions[g]).copied().collect()
    }
}

fn check_binary(labels: &[u8]) -> Result<()> {
    match labels.iter().position(|&l| l > 1) {
        Some(index) => Err(PipelineError::NonBinaryLabel { index, value: labels[index] }),
        None => Ok(()),
    }
}

/// Shuffle the controls with substream `(seed, SUBGROUP)` and cut them into
/// `floor(controls / cases)` consecutive blocks of `cases` rows each.
pub fn make_balanced_subgroups(labels: &[u8], seed: u64) -> Result<SubgroupPlan> {
    check_binary(labels)?;
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut majority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if minority.is_empty() {
        return Err(PipelineError::EmptyClass { class: 1 });
    }
    if majority.is_empty() {
        return Err(PipelineError::EmptyClass { class: 0 });
    }
    if majority.len() < minority.len() {
        return Err(PipelineError::MajorityTooSmall { minority: minority.len(), majority: majority.len() });
    }
    majority.shuffle(&mut seed::stream(seed, &[tags::SUBGROUP]));
    let m = minority.len();
    let n_groups = majority.len() / m;
    let partitions = majority.chunks_exact(m).map(<[usize]>::to_vec).collect::<Vec<_>>();
    debug_assert_eq!(partitions.len(), n_groups);
    let discarded = majority[n_groups * m..].to_vec();
    Ok(SubgroupPlan { minority, partitions, discarded, seed })
}

/// Stratified k-fold split of `indices` (positions into `labels`).
///
/// Each class is shuffled with substream `(seed, FOLD, class)` and dealt
/// round-robin, the dealing position carrying over from controls to cases so
/// fold sizes differ by at most one. Folds are returned sorted.
pub fn kfold_split(indices: &[usize], labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(PipelineError::InvalidConfig(format!("k = {k} must be at least 2")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members = Vec::new();
        for &i in indices {
            let label = *labels.get(i).ok_or(PipelineError::LengthMismatch { left: i + 1, right: labels.len() })?;
            if label > 1 {
                return Err(PipelineError::NonBinaryLabel { index: i, value: label });
            }
            if label == class {
                members.push(i);
            }
        }
        if members.len() < k {
            return Err(PipelineError::ClassSmallerThanK { class, count: members.len(), k });
        }
        members.shuffle(&mut seed::stream(seed, &[tags::FOLD, u64::from(class)]));
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
