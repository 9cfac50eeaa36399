#![allow(dead_code)]

use actfs_core::dataset::QuantizedDataset;
use proptest::prelude::*;

/// Random labeled table with up to `max_m` rows, `max_d` features and
/// alphabets of up to `max_alpha` values.
pub fn labeled_dataset(
    max_m: usize,
    max_d: usize,
    max_alpha: u32,
) -> impl Strategy<Value = QuantizedDataset> {
    (1..=max_m, 1..=max_d)
        .prop_flat_map(move |(m, d)| {
            (
                prop::collection::vec(1..=max_alpha, d),
                prop::collection::vec(0u8..=1, m),
                Just(m),
            )
        })
        .prop_flat_map(|(alphas, labels, m)| {
            let cols: Vec<_> = alphas
                .iter()
                .map(|&a| prop::collection::vec(0..a, m))
                .collect();
            (cols, Just(alphas), Just(labels))
        })
        .prop_map(|(cols, alphas, labels)| {
            let d = cols.len();
            QuantizedDataset::new(
                (0..d).map(|j| format!("c{j}")).collect(),
                cols,
                alphas.iter().map(|&a| a as usize).collect(),
                Some(labels),
            )
            .expect("generated table is valid")
        })
}

pub fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}
