//! Non-adaptive labeling baselines and the shared ranking step.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::afs::top_k_smallest;
use crate::confbounds::{binary_entropy, BoundFamily};
use crate::dataset::{marginals, QuantizedDataset};
use crate::single_feature::{estimate_entropy, AllocationState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Uniform sampling without replacement.
    Random,
    /// Greedy farthest-first traversal under Hamming distance.
    Coreset,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Random => "RANDOM",
            BaselineKind::Coreset => "CORESET",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RANDOM" => Ok(BaselineKind::Random),
            "CORESET" => Ok(BaselineKind::Coreset),
            other => Err(Error::InvalidConfig(format!("unknown baseline `{other}`"))),
        }
    }
}

/// Pick `budget` distinct example indices, in selection order.
pub fn select_examples(
    ds: &QuantizedDataset,
    budget: usize,
    kind: BaselineKind,
    seed: u64,
) -> Result<Vec<usize>> {
    let m = ds.m();
    if budget > m {
        return Err(Error::BudgetExceedsPool {
            budget,
            available: m,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        BaselineKind::Random => sample(&mut rng, m, budget).into_vec(),
        BaselineKind::Coreset => farthest_first(ds, budget, &mut rng),
    })
}

pub fn hamming(ds: &QuantizedDataset, a: usize, b: usize) -> usize {
    (0..ds.d()).filter(|&j| ds.value(a, j) != ds.value(b, j)).count()
}

fn farthest_first(ds: &QuantizedDataset, budget: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = ds.m();
    if budget == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(budget);
    let mut taken = vec![false; m];
    let mut nearest = vec![usize::MAX; m];
    let mut next = rng.gen_range(0..m);
    loop {
        chosen.push(next);
        taken[next] = true;
        if chosen.len() == budget {
            break;
        }
        for i in 0..m {
            if !taken[i] {
                nearest[i] = nearest[i].min(hamming(ds, i, next));
            }
        }
        let mut best: Option<usize> = None;
        for i in 0..m {
            if !taken[i] && best.map_or(true, |b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        next = best.expect("budget does not exceed the pool");
    }
    chosen
}

/// Plug-in entropy of every feature from full-sample marginals and the label
/// rates observed on `labeled`.
pub fn labeled_estimates(ds: &QuantizedDataset, labeled: &[(usize, u8)]) -> Result<Vec<f64>> {
    let marg = marginals(ds);
    (0..ds.d())
        .map(|j| {
            let mut st = AllocationState::new(ds.alphabet(j), BoundFamily::ClopperPearson, 0.05)?;
            for &(i, y) in labeled {
                if i >= ds.m() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: ds.m(),
                    });
                }
                st.record(ds.value(i, j), y)?;
            }
            Ok(estimate_entropy(marg.feature(j), &st))
        })
        .collect()
}

/// The `k` features with smallest estimated conditional entropy given `labeled`.
pub fn rank_from_labels(
    ds: &QuantizedDataset,
    labeled: &[(usize, u8)],
    k: usize,
) -> Result<Vec<usize>> {
    if k == 0 || k > ds.d() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} must lie in [1, {}]",
            ds.d()
        )));
    }
    if labeled.is_empty() {
        return Err(Error::NoLabels);
    }
    Ok(top_k_smallest(&labeled_estimates(ds, labeled)?, k))
}

/// Conditional entropy of every feature under the dataset's full labels.
pub fn exact_entropies(ds: &QuantizedDataset) -> Result<Vec<f64>> {
    let labels = ds.labels().ok_or(Error::MissingGroundTruth)?;
    let m = ds.m() as f64;
    Ok((0..ds.d())
        .map(|j| {
            let a = ds.alphabet(j);
            let mut count = vec![0u64; a];
            let mut pos = vec![0u64; a];
            for (i, &y) in labels.iter().enumerate() {
                let v = ds.value(i, j);
                count[v] += 1;
                pos[v] += y as u64;
            }
            (0..a)
                .filter(|&v| count[v] > 0)
                .map(|v| count[v] as f64 / m * binary_entropy(pos[v] as f64 / count[v] as f64))
                .sum()
        })
        .collect())
}

/// `sum_{j in selected} H_j - sum_{j in best k} H_j`, never negative.
pub fn selection_gap(entropies: &[f64], selected: &[usize]) -> f64 {
    let best = top_k_smallest(entropies, selected.len());
    let chosen: f64 = selected.iter().map(|&j| entropies[j]).sum();
    let optimal: f64 = best.iter().map(|&j| entropies[j]).sum();
    (chosen - optimal).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::planted_dataset;

    fn grid_dataset() -> QuantizedDataset {
        // 3 binary features, all 8 rows plus duplicates
        let rows: Vec<[u32; 3]> = vec![
            [0, 0, 0],
            [0, 0, 1],
            [0, 1, 0],
            [0, 1, 1],
            [1, 0, 0],
            [1, 0, 1],
            [1, 1, 0],
            [1, 1, 1],
            [0, 0, 0],
            [1, 1, 1],
        ];
        let cols = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        QuantizedDataset::from_columns(cols, None).unwrap()
    }

    fn covering_radius(ds: &QuantizedDataset, centers: &[usize]) -> usize {
        (0..ds.m())
            .map(|i| centers.iter().map(|&c| hamming(ds, i, c)).min().unwrap())
            .max()
            .unwrap()
    }

    #[test]
    fn random_is_distinct_and_seeded() {
        let ds = planted_dataset(100, 4, [0.1, 0.9], 1).unwrap();
        let a = select_examples(&ds, 30, BaselineKind::Random, 7).unwrap();
        let b = select_examples(&ds, 30, BaselineKind::Random, 7).unwrap();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 30);
        assert!(select_examples(&ds, 101, BaselineKind::Random, 7).is_err());
        assert!(select_examples(&ds, 0, BaselineKind::Coreset, 7).unwrap().is_empty());
    }

    #[test]
    fn coreset_is_two_approximate() {
        let ds = grid_dataset();
        for seed in 0..20 {
            for budget in 1..=4 {
                let picked = select_examples(&ds, budget, BaselineKind::Coreset, seed).unwrap();
                let greedy = covering_radius(&ds, &picked);
                // brute-force optimum over all center subsets of this size
                let mut opt = usize::MAX;
                for mask in 0u32..(1 << ds.m()) {
                    if mask.count_ones() as usize == budget {
                        let centers: Vec<usize> =
                            (0..ds.m()).filter(|&i| mask & (1 << i) != 0).collect();
                        opt = opt.min(covering_radius(&ds, &centers));
                    }
                }
                assert!(greedy <= 2 * opt, "seed {seed} budget {budget}: {greedy} > 2 * {opt}");
            }
        }
    }

    #[test]
    fn coreset_second_point_is_farthest() {
        let ds = grid_dataset();
        let picked = select_examples(&ds, 2, BaselineKind::Coreset, 3).unwrap();
        assert_eq!(hamming(&ds, picked[0], picked[1]), 3);
    }

    #[test]
    fn ranking_from_all_labels_matches_exact() {
        let ds = planted_dataset(200, 5, [0.05, 0.95], 2).unwrap();
        let labels = ds.labels().unwrap();
        let all: Vec<(usize, u8)> = labels.iter().copied().enumerate().collect();
        let est = labeled_estimates(&ds, &all).unwrap();
        let exact = exact_entropies(&ds).unwrap();
        for (a, b) in est.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(rank_from_labels(&ds, &all, 1).unwrap(), vec![0]);
        assert_eq!(selection_gap(&exact, &[0]), 0.0);
        assert!(selection_gap(&exact, &[1]) > 0.0);
    }

    #[test]
    fn single_label_ties_to_index_order() {
        let ds = planted_dataset(50, 4, [0.05, 0.95], 2).unwrap();
        assert_eq!(rank_from_labels(&ds, &[(9, 1)], 2).unwrap(), vec![0, 1]);
        assert!(matches!(rank_from_labels(&ds, &[], 2), Err(Error::NoLabels)));
        assert!(rank_from_labels(&ds, &[(9, 1)], 0).is_err());
    }

    #[test]
    fn exact_entropies_need_labels() {
        let ds = grid_dataset();
        assert!(matches!(exact_entropies(&ds), Err(Error::MissingGroundTruth)));
    }
}
