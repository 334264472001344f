use std::collections::{BTreeMap, BTreeSet};

use cohortshap::dataset::{
    apply_missing_policy, generate_synthetic, parse_delimited, select_feature_set, write_delimited, DelimitedOptions, SyntheticSpec,
};
use cohortshap::explain::ImportanceVector;
use cohortshap::pipeline::{aggregate_importance, kfold_split, make_balanced_subgroups};
use cohortshap::FeatureSet;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delimited_round_trip(cases in 1usize..15, controls in 1usize..15, p_nut in 0usize..4, p_phi in 1usize..4, missing in 0.0f64..0.5, seed in any::<u64>()) {
        let ds = generate_synthetic(&SyntheticSpec {
            n_cases: cases, n_controls: controls, p_nutritional: p_nut, p_phichar: p_phi,
            informative: vec![], missing_prob: missing, seed,
        }).unwrap();
        let kind_map: BTreeMap<_, _> = ds.specs().iter().map(|s| (s.name.clone(), s.kind)).collect();
        let back = parse_delimited(&write_delimited(&ds), &DelimitedOptions { kind_map, ..Default::default() }).unwrap();
        let back = apply_missing_policy(back);
        prop_assert_eq!(back.values(), ds.values());
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.specs(), ds.specs());
        prop_assert_eq!(back.missing(), ds.missing());
    }

    #[test]
    fn missing_policy_marks_exactly_the_mask(cases in 1usize..10, controls in 1usize..10, missing in 0.0f64..0.9, seed in any::<u64>()) {
        let ds = generate_synthetic(&SyntheticSpec {
            n_cases: cases, n_controls: controls, p_nutritional: 3, p_phichar: 2,
            informative: vec![], missing_prob: missing, seed,
        }).unwrap();
        for (v, m) in ds.values().iter().zip(ds.missing()) {
            if *m {
                prop_assert_eq!(*v, -1.0);
            } else {
                prop_assert!(*v != -1.0);
            }
        }
    }

    #[test]
    fn both_is_the_union_of_the_kinds(p_nut in 1usize..6, p_phi in 1usize..6, seed in any::<u64>()) {
        let ds = generate_synthetic(&SyntheticSpec {
            n_cases: 3, n_controls: 3, p_nutritional: p_nut, p_phichar: p_phi,
            informative: vec![], missing_prob: 0.0, seed,
        }).unwrap();
        let names = |w| select_feature_set(&ds, w).unwrap().feature_names().into_iter().collect::<BTreeSet<_>>();
        let union: BTreeSet<_> = names(FeatureSet::PhiChar).union(&names(FeatureSet::Nutritional)).cloned().collect();
        prop_assert_eq!(names(FeatureSet::Both), union);
        prop_assert_eq!(select_feature_set(&ds, FeatureSet::Both).unwrap().feature_names(), ds.feature_names());
    }

    #[test]
    fn subgroups_partition_the_controls(cases in 1usize..40, extra in 0usize..200, seed in any::<u64>()) {
        let controls = cases + extra;
        let mut labels = vec![1u8; cases];
        labels.extend(vec![0u8; controls]);
        let plan = make_balanced_subgroups(&labels, seed).unwrap();
        prop_assert_eq!(plan.n_subgroups(), controls / cases);
        prop_assert_eq!(plan.discarded.len(), controls % cases);
        let mut seen = BTreeSet::new();
        for part in plan.partitions.iter().chain(std::iter::once(&plan.discarded)) {
            for &i in part {
                prop_assert_eq!(labels[i], 0);
                prop_assert!(seen.insert(i));
            }
        }
        prop_assert_eq!(seen.len(), controls);
        prop_assert!(plan.partitions.iter().all(|p| p.len() == cases));
    }

    #[test]
    fn folds_partition_and_stratify(n0 in 2usize..60, n1 in 2usize..60, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(n0 >= k && n1 >= k);
        let mut labels = vec![0u8; n0];
        labels.extend(vec![1u8; n1]);
        // Use a non-contiguous index set to check positions are respected.
        let indices: Vec<usize> = (0..labels.len()).rev().collect();
        let folds = kfold_split(&indices, &labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for f in &folds {
            let c1 = f.iter().filter(|&&i| labels[i] == 1).count() as f64;
            let c0 = f.len() as f64 - c1;
            prop_assert!((c1 - n1 as f64 / k as f64).abs() < 1.0 + 1e-9);
            prop_assert!((c0 - n0 as f64 / k as f64).abs() < 1.0 + 1e-9);
        }
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(kfold_split(&indices, &labels, k, seed).unwrap(), folds);
    }

    #[test]
    fn ranking_is_shift_invariant(raw in prop::collection::vec(prop::collection::vec(0u32..1000, 6), 1..5), shift in -5.0f64..5.0) {
        let names: Vec<String> = (0..6).map(|i| format!("F{i}")).collect();
        let to_iv = |v: &Vec<u32>, s: f64| ImportanceVector::new(v.iter().map(|&a| f64::from(a) / 500.0 + s + 5.0).collect()).unwrap();
        let base = aggregate_importance(&raw.iter().map(|v| to_iv(v, 0.0)).collect::<Vec<_>>(), &names).unwrap();
        let moved = aggregate_importance(&raw.iter().map(|v| to_iv(v, shift)).collect::<Vec<_>>(), &names).unwrap();
        prop_assert!((base.total() - 100.0).abs() < 1e-6);
        prop_assert!((moved.total() - 100.0).abs() < 1e-6);
        for (a, b) in base.entries.iter().zip(&moved.entries) {
            prop_assert!((a.weight - b.weight).abs() < 1e-9);
        }
        // Order can only differ among weights that tie up to rounding.
        for w in moved.entries.windows(2) {
            prop_assert!(w[0].weight >= w[1].weight);
        }
        let rank = |r: &cohortshap::RankedImportanceReport| r.entries.iter().map(|e| e.name.clone()).collect::<Vec<_>>();
        let distinct = base.entries.windows(2).all(|w| w[0].weight - w[1].weight > 1e-9);
        if distinct {
            prop_assert_eq!(rank(&base), rank(&moved));
        }
    }
}
