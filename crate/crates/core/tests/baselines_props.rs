#[path = "common/mod.rs"]
mod common;

use actfs_core::afs::top_k_smallest;
use actfs_core::baselines::{
    exact_entropies, hamming, rank_from_labels, select_examples, BaselineKind,
};
use actfs_core::dataset::QuantizedDataset;
use common::{cases, labeled_dataset};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = BaselineKind> {
    prop::sample::select(vec![BaselineKind::Random, BaselineKind::Coreset])
}

fn radius(ds: &QuantizedDataset, centers: &[usize]) -> usize {
    (0..ds.m())
        .map(|i| centers.iter().map(|&c| hamming(ds, i, c)).min().unwrap())
        .max()
        .unwrap()
}

fn optimal_radius(ds: &QuantizedDataset, b: usize) -> usize {
    let m = ds.m();
    (0u32..1 << m)
        .filter(|mask| mask.count_ones() as usize == b)
        .map(|mask| {
            let centers: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
            radius(ds, &centers)
        })
        .min()
        .unwrap()
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn picks_are_distinct_and_seeded(
        ds in labeled_dataset(40, 4, 3),
        kind in kind(),
        frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let b = ((ds.m() as f64) * frac).round() as usize;
        let a = select_examples(&ds, b, kind, seed).unwrap();
        prop_assert_eq!(a.len(), b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), b);
        prop_assert!(a.iter().all(|&i| i < ds.m()));
        prop_assert_eq!(select_examples(&ds, b, kind, seed).unwrap(), a);
        prop_assert!(select_examples(&ds, ds.m() + 1, kind, seed).is_err());
    }

    #[test]
    fn coreset_distances_shrink(ds in labeled_dataset(40, 4, 3), seed in any::<u64>()) {
        let picks = select_examples(&ds, ds.m(), BaselineKind::Coreset, seed).unwrap();
        let mut prev = usize::MAX;
        for t in 1..picks.len() {
            let gap = picks[..t].iter().map(|&c| hamming(&ds, picks[t], c)).min().unwrap();
            prop_assert!(gap <= prev);
            prev = gap;
        }
    }

    #[test]
    fn coreset_within_twice_optimal(
        ds in labeled_dataset(12, 4, 3),
        b_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let b = 1 + ((ds.m() - 1) as f64 * b_frac) as usize;
        let picks = select_examples(&ds, b, BaselineKind::Coreset, seed).unwrap();
        prop_assert!(radius(&ds, &picks) <= 2 * optimal_radius(&ds, b));
    }

    #[test]
    fn full_labels_give_the_exact_ranking(ds in labeled_dataset(40, 5, 4), kfrac in 0.0f64..1.0) {
        let k = 1 + ((ds.d() - 1) as f64 * kfrac) as usize;
        let labeled: Vec<(usize, u8)> = ds.labels().unwrap().iter().copied().enumerate().collect();
        let ranked = rank_from_labels(&ds, &labeled, k).unwrap();
        let exact = exact_entropies(&ds).unwrap();
        let best = top_k_smallest(&exact, k);
        let sum = |s: &[usize]| s.iter().map(|&j| exact[j]).sum::<f64>();
        prop_assert!((sum(&ranked) - sum(&best)).abs() <= 1e-12);
    }
}

/// Every property in this file, for callers that run them outside the test harness.
#[allow(dead_code)]
pub const PROPERTIES: &[(&str, fn())] = &[
    ("picks_are_distinct_and_seeded", picks_are_distinct_and_seeded),
    ("coreset_distances_shrink", coreset_distances_shrink),
    ("coreset_within_twice_optimal", coreset_within_twice_optimal),
    ("full_labels_give_the_exact_ranking", full_labels_give_the_exact_ranking),
];
