//! Active feature selection (AFS).
//!
//! Each step:
//!
//! 1. computes, per feature, the plug-in conditional entropy `H_j` and a
//!    lower/upper confidence pair from Clopper-Pearson intervals on every
//!    `q_v(j)`;
//! 2. takes `F_k`, the `k` features with smallest `H_j`, and an adversarial
//!    alternative `F~_k` where members of `F_k` are scored by their pessimistic
//!    (upper) bound and outsiders by their optimistic (lower) bound;
//! 3. stops adaptive sampling if the two sets agree, otherwise labels the
//!    unlabeled example maximizing a score over `F = F_k xor F~_k` that
//!    combines the entropy-allocation weight of each feature value with a
//!    pairwise sampling-bias correction.
//!
//! A safeguard switches to uniform random labeling when the summed estimate
//! of the current top-k has not moved for `lambda` consecutive steps.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::confbounds::{lcb_hb, ucb_shaped, BoundFamily, Shape};
use crate::dataset::{marginals, LabelOracle, MarginalTable, PairTable, QuantizedDataset};
use crate::single_feature::{estimate_entropy, weights, AllocationState, Objective};
use crate::{Error, Result};

/// Reduction used to combine per-pair ratios and per-feature scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregation {
    #[default]
    L1,
    L2,
    Linf,
}

impl Aggregation {
    pub fn apply(self, xs: &[f64]) -> f64 {
        match self {
            Aggregation::L1 => xs.iter().map(|x| x.abs()).sum(),
            Aggregation::L2 => xs.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Aggregation::Linf => xs.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::L1 => "l1",
            Aggregation::L2 => "l2",
            Aggregation::Linf => "linf",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Aggregation::L1),
            "l2" => Ok(Aggregation::L2),
            "linf" | "lmax" => Ok(Aggregation::Linf),
            other => Err(Error::InvalidConfig(format!(
                "unknown aggregation `{other}` (expected l1, l2 or linf)"
            ))),
        }
    }
}

/// How an unlabeled example is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScoreMode {
    /// Aggregated per-feature score over `F` with the pairwise bias correction.
    #[default]
    Full,
    /// Naive score of one feature drawn uniformly from all features each step.
    SingleFeature,
    /// Mean naive score over all features.
    AverageAll,
    /// Mean naive score over `F`.
    AverageSelected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfsConfig {
    pub k: usize,
    pub delta: f64,
    pub budget: usize,
    /// Safeguard window; `None` disables the safeguard.
    pub lambda: Option<usize>,
    pub psi: Aggregation,
    pub seed: u64,
    pub mode: ScoreMode,
    /// Spend the budget left after the candidate set empties on uniform random
    /// labels instead of leaving it unused.
    pub fill_after_convergence: bool,
    /// Keep a copy of every feature's estimate in each trace step.
    pub record_estimates: bool,
}

impl AfsConfig {
    pub const DEFAULT_DELTA: f64 = 0.05;
    pub const DEFAULT_LAMBDA: usize = 30;

    pub fn new(k: usize, budget: usize) -> Self {
        Self {
            k,
            delta: Self::DEFAULT_DELTA,
            budget,
            lambda: Some(Self::DEFAULT_LAMBDA),
            psi: Aggregation::L1,
            seed: 0,
            mode: ScoreMode::Full,
            fill_after_convergence: true,
            record_estimates: false,
        }
    }

    pub fn validate(&self, ds: &QuantizedDataset) -> Result<()> {
        if self.k == 0 || self.k > ds.d() {
            return Err(Error::InvalidConfig(format!(
                "k = {} must lie in [1, {}]",
                self.k,
                ds.d()
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidDelta(self.delta));
        }
        if self.budget > ds.m() {
            return Err(Error::BudgetExceedsPool {
                budget: self.budget,
                available: ds.m(),
            });
        }
        if self.lambda == Some(0) {
            return Err(Error::InvalidConfig("lambda must be at least 1".into()));
        }
        Ok(())
    }
}

/// Plug-in conditional entropy of one feature with its confidence envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyTriple {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `(H_j, H_j^l, H_j^u)` for every feature.
pub fn entropy_triples(states: &[AllocationState], marg: &MarginalTable) -> Vec<EntropyTriple> {
    states
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let p = marg.feature(j);
            let mut lower = 0.0;
            let mut upper = 0.0;
            for (v, &pv) in p.iter().enumerate() {
                let iv = st.interval(v);
                lower += pv * lcb_hb(iv);
                upper += pv * ucb_shaped(Shape::Hb, iv);
            }
            EntropyTriple {
                estimate: estimate_entropy(p, st),
                lower,
                upper,
            }
        })
        .collect()
}

/// Indices of the `k` smallest values, ties to the lowest index, in increasing
/// index order.
pub fn top_k_smallest(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// The current top-k, its adversarial alternative and their symmetric difference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSets {
    pub top_k: Vec<usize>,
    pub alternative: Vec<usize>,
    pub candidates: Vec<usize>,
}

pub fn candidate_set(triples: &[EntropyTriple], k: usize) -> CandidateSets {
    let estimates: Vec<f64> = triples.iter().map(|t| t.estimate).collect();
    let top_k = top_k_smallest(&estimates, k);
    let inside: BTreeSet<usize> = top_k.iter().copied().collect();
    let adversarial: Vec<f64> = triples
        .iter()
        .enumerate()
        .map(|(j, t)| if inside.contains(&j) { t.upper } else { t.lower })
        .collect();
    let alternative = top_k_smallest(&adversarial, k);
    let other: BTreeSet<usize> = alternative.iter().copied().collect();
    let candidates = inside.symmetric_difference(&other).copied().collect();
    CandidateSets {
        top_k,
        alternative,
        candidates,
    }
}

/// `rho = p_full / max(p_labeled, 1/m)`.
pub fn bias_ratio_from(full: f64, labeled_hits: u64, labeled_total: u64, m: usize) -> f64 {
    let labeled = if labeled_total == 0 {
        0.0
    } else {
        labeled_hits as f64 / labeled_total as f64
    };
    full / labeled.max(1.0 / m as f64)
}

#[derive(Debug, Clone)]
struct LabeledPairCounts {
    width: usize,
    counts: Vec<u64>,
}

/// Labels collected so far and the statistics derived from them.
#[derive(Debug, Clone)]
pub struct AfsState {
    states: Vec<AllocationState>,
    order: Vec<usize>,
    labels: Vec<u8>,
    is_labeled: Vec<bool>,
    full_pairs: HashMap<(usize, usize), PairTable>,
    labeled_pairs: HashMap<(usize, usize), LabeledPairCounts>,
}

impl AfsState {
    pub fn new(ds: &QuantizedDataset, delta: f64) -> Result<Self> {
        let states = ds
            .alphabets()
            .iter()
            .map(|&size| AllocationState::new(size, BoundFamily::ClopperPearson, delta))
            .collect::<Result<_>>()?;
        Ok(Self {
            states,
            order: Vec::new(),
            labels: Vec::new(),
            is_labeled: vec![false; ds.m()],
            full_pairs: HashMap::new(),
            labeled_pairs: HashMap::new(),
        })
    }

    pub fn feature_states(&self) -> &[AllocationState] {
        &self.states
    }

    /// Labeled example indices in the order they were labeled.
    pub fn labeled(&self) -> &[usize] {
        &self.order
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.is_labeled[i]
    }

    pub fn record(&mut self, ds: &QuantizedDataset, i: usize, y: u8) -> Result<()> {
        if self.is_labeled[i] {
            return Err(Error::InvalidConfig(format!("example {i} is already labeled")));
        }
        for (j, st) in self.states.iter_mut().enumerate() {
            st.record(ds.value(i, j), y)?;
        }
        for (&(a, b), pc) in self.labeled_pairs.iter_mut() {
            pc.counts[ds.value(i, a) * pc.width + ds.value(i, b)] += 1;
        }
        self.is_labeled[i] = true;
        self.order.push(i);
        self.labels.push(y);
        Ok(())
    }

    /// Drop labeled-pair counts for pairs outside `features` and build any
    /// missing ones from the labels collected so far.
    fn sync_pairs(&mut self, ds: &QuantizedDataset, features: &[usize]) -> Result<()> {
        let mut wanted = BTreeSet::new();
        for (x, &a) in features.iter().enumerate() {
            for &b in &features[x + 1..] {
                wanted.insert((a.min(b), a.max(b)));
            }
        }
        self.labeled_pairs.retain(|key, _| wanted.contains(key));
        for &(a, b) in &wanted {
            if !self.full_pairs.contains_key(&(a, b)) {
                self.full_pairs.insert((a, b), PairTable::compute(ds, a, b)?);
            }
            if !self.labeled_pairs.contains_key(&(a, b)) {
                let width = ds.alphabet(b);
                let mut counts = vec![0u64; ds.alphabet(a) * width];
                for &i in &self.order {
                    counts[ds.value(i, a) * width + ds.value(i, b)] += 1;
                }
                self.labeled_pairs
                    .insert((a, b), LabeledPairCounts { width, counts });
            }
        }
        Ok(())
    }

    /// Sum of the labeled-pair counts for `(j1, j2)`, when cached.
    pub fn labeled_pair_total(&self, j1: usize, j2: usize) -> Option<u64> {
        self.labeled_pairs
            .get(&(j1.min(j2), j1.max(j2)))
            .map(|pc| pc.counts.iter().sum())
    }

    /// Sampling-bias ratio of the value pair `(v1, v2)` of features `(j1, j2)`.
    pub fn bias_ratio(
        &mut self,
        ds: &QuantizedDataset,
        j1: usize,
        j2: usize,
        v1: usize,
        v2: usize,
    ) -> Result<f64> {
        if j1 == j2 {
            return Err(Error::SameFeature(j1));
        }
        let key = (j1.min(j2), j1.max(j2));
        let (va, vb) = if j1 < j2 { (v1, v2) } else { (v2, v1) };
        if !self.labeled_pairs.contains_key(&key) {
            let mut features: Vec<usize> = self
                .labeled_pairs
                .keys()
                .flat_map(|&(a, b)| [a, b])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            features.extend([j1, j2]);
            features.sort_unstable();
            features.dedup();
            self.sync_pairs(ds, &features)?;
        }
        Ok(self.ratio(ds.m(), key, va, vb))
    }

    fn ratio(&self, m: usize, key: (usize, usize), va: usize, vb: usize) -> f64 {
        let full = self.full_pairs[&key].get(va, vb);
        let pc = &self.labeled_pairs[&key];
        bias_ratio_from(
            full,
            pc.counts[va * pc.width + vb],
            self.order.len() as u64,
            m,
        )
    }
}

/// Per-step score ingredients: the naive per-value score of every candidate
/// feature and the bias ratios of every ordered candidate pair.
#[derive(Debug, Clone)]
pub struct StepScorer {
    features: Vec<usize>,
    /// `naive[x][v] = w(j, v) / (n(j, v) + 1)` for `j = features[x]`.
    naive: Vec<Vec<f64>>,
    /// `ratios[x][y][v1 * |V_{features[y]}| + v2]` for `x != y`.
    ratios: Vec<Vec<Vec<f64>>>,
    psi: Aggregation,
}

impl StepScorer {
    fn naive_scores(st: &AllocationState, p: &[f64]) -> Result<Vec<f64>> {
        let w = weights(Objective::Entropy, p, st)?;
        Ok(w
            .iter()
            .enumerate()
            .map(|(v, wv)| wv / (st.count(v) as f64 + 1.0))
            .collect())
    }

    /// Naive scores only (no bias correction), for the given features.
    fn naive_only(state: &AfsState, marg: &MarginalTable, features: &[usize]) -> Result<Self> {
        let naive = features
            .iter()
            .map(|&j| Self::naive_scores(&state.states[j], marg.feature(j)))
            .collect::<Result<_>>()?;
        Ok(Self {
            features: features.to_vec(),
            naive,
            ratios: Vec::new(),
            psi: Aggregation::L1,
        })
    }

    pub fn new(
        ds: &QuantizedDataset,
        state: &mut AfsState,
        marg: &MarginalTable,
        features: &[usize],
        psi: Aggregation,
    ) -> Result<Self> {
        state.sync_pairs(ds, features)?;
        let mut scorer = Self::naive_only(state, marg, features)?;
        scorer.psi = psi;
        let m = ds.m();
        scorer.ratios = features
            .iter()
            .map(|&j| {
                features
                    .iter()
                    .map(|&r| {
                        if r == j {
                            return Vec::new();
                        }
                        let key = (j.min(r), j.max(r));
                        let (aj, ar) = (ds.alphabet(j), ds.alphabet(r));
                        let mut table = vec![0.0; aj * ar];
                        for v1 in 0..aj {
                            for v2 in 0..ar {
                                let (va, vb) = if j < r { (v1, v2) } else { (v2, v1) };
                                table[v1 * ar + v2] = state.ratio(m, key, va, vb);
                            }
                        }
                        table
                    })
                    .collect()
            })
            .collect();
        Ok(scorer)
    }

    /// Multiply every bias ratio by `c`.
    pub fn scale_ratios(&mut self, c: f64) {
        for row in &mut self.ratios {
            for table in row {
                for r in table {
                    *r *= c;
                }
            }
        }
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    /// Aggregated score of example `i`.
    pub fn score(&self, ds: &QuantizedDataset, i: usize) -> f64 {
        let n = self.features.len();
        let mut per_feature = [0.0f64; 64];
        let mut heap;
        let per_feature: &mut [f64] = if n <= per_feature.len() {
            &mut per_feature[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        let mut pair_buf = Vec::with_capacity(n.saturating_sub(1));
        for (x, &j) in self.features.iter().enumerate() {
            let vj = ds.value(i, j);
            let base = self.naive[x][vj];
            let factor = if n == 1 {
                1.0
            } else {
                pair_buf.clear();
                for (y, &r) in self.features.iter().enumerate() {
                    if y != x {
                        let ar = ds.alphabet(r);
                        pair_buf.push(self.ratios[x][y][vj * ar + ds.value(i, r)]);
                    }
                }
                self.psi.apply(&pair_buf)
            };
            per_feature[x] = base * factor;
        }
        self.psi.apply(per_feature)
    }

    /// Mean naive score of example `i` over the scorer's features.
    pub fn mean_naive(&self, ds: &QuantizedDataset, i: usize) -> f64 {
        let total: f64 = self
            .features
            .iter()
            .enumerate()
            .map(|(x, &j)| self.naive[x][ds.value(i, j)])
            .sum();
        total / self.features.len() as f64
    }
}

/// Aggregated score of example `i` for candidate features `features`.
pub fn example_score(
    ds: &QuantizedDataset,
    state: &mut AfsState,
    marg: &MarginalTable,
    i: usize,
    features: &[usize],
    psi: Aggregation,
) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::InvalidConfig("candidate feature set is empty".into()));
    }
    Ok(StepScorer::new(ds, state, marg, features, psi)?.score(ds, i))
}

/// Why a step's example was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Highest score among unlabeled examples.
    Scored,
    /// Uniform random pick after the safeguard fired.
    SafeguardFallback,
    /// Uniform random pick after the candidate set became empty.
    ConvergedFill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// 1-based step number.
    pub step: usize,
    pub chosen: usize,
    pub label: u8,
    pub kind: StepKind,
    /// Plug-in top-k before this step's label.
    pub top_k: Vec<usize>,
    /// Candidate set used for scoring (empty for random steps).
    pub candidates: Vec<usize>,
    /// Examples scored to make the choice.
    pub scored_examples: usize,
    pub estimates: Option<Vec<f64>>,
    /// The safeguard fired at the end of this step.
    pub safeguard_fired: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub steps: Vec<TraceStep>,
    /// Step after which the safeguard fired.
    pub safeguard_step: Option<usize>,
    /// Step at which the candidate set was first empty.
    pub converged_step: Option<usize>,
    /// Budget left unspent.
    pub unspent: usize,
}

impl RunTrace {
    pub fn safeguard_fired(&self) -> bool {
        self.safeguard_step.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct AfsOutcome {
    /// Selected features in increasing index order.
    pub selected: Vec<usize>,
    /// Final plug-in estimate of every feature.
    pub estimates: Vec<f64>,
    /// `(example index, label)` in labeling order.
    pub labeled: Vec<(usize, u8)>,
    pub trace: RunTrace,
}

enum Phase {
    Adaptive,
    Random(StepKind),
}

/// Run active feature selection on `ds`, querying `oracle` for labels.
pub fn afs_run<O: LabelOracle + ?Sized>(
    ds: &QuantizedDataset,
    oracle: &mut O,
    cfg: &AfsConfig,
) -> Result<AfsOutcome> {
    cfg.validate(ds)?;
    let marg = marginals(ds);
    let mut state = AfsState::new(ds, cfg.delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = RunTrace::default();
    let mut phase = Phase::Adaptive;
    let mut random_queue: Vec<usize> = Vec::new();
    let mut previous_sum: Option<f64> = None;
    let mut unchanged = 0usize;
    let all_features: Vec<usize> = (0..ds.d()).collect();

    for step in 1..=cfg.budget {
        let triples = entropy_triples(&state.states, &marg);
        let sets = candidate_set(&triples, cfg.k);
        let estimates: Vec<f64> = triples.iter().map(|t| t.estimate).collect();

        if let Phase::Adaptive = phase {
            if sets.candidates.is_empty() {
                trace.converged_step = Some(step);
                if !cfg.fill_after_convergence {
                    break;
                }
                phase = Phase::Random(StepKind::ConvergedFill);
                random_queue = shuffled_unlabeled(&state, &mut rng);
            }
        }

        let (chosen, kind, scored, candidates) = match phase {
            Phase::Adaptive => {
                let (chosen, scored) = match cfg.mode {
                    ScoreMode::Full => {
                        let scorer =
                            StepScorer::new(ds, &mut state, &marg, &sets.candidates, cfg.psi)?;
                        argmax_unlabeled(&state, |i| scorer.score(ds, i))
                    }
                    ScoreMode::AverageSelected => {
                        let scorer = StepScorer::naive_only(&state, &marg, &sets.candidates)?;
                        argmax_unlabeled(&state, |i| scorer.mean_naive(ds, i))
                    }
                    ScoreMode::AverageAll => {
                        let scorer = StepScorer::naive_only(&state, &marg, &all_features)?;
                        argmax_unlabeled(&state, |i| scorer.mean_naive(ds, i))
                    }
                    ScoreMode::SingleFeature => {
                        let j = rng.gen_range(0..ds.d());
                        let scorer = StepScorer::naive_only(&state, &marg, &[j])?;
                        argmax_unlabeled(&state, |i| scorer.mean_naive(ds, i))
                    }
                };
                let chosen = chosen.ok_or_else(|| {
                    Error::InvalidConfig("no unlabeled example left to score".into())
                })?;
                (chosen, StepKind::Scored, scored, sets.candidates.clone())
            }
            Phase::Random(kind) => {
                let chosen = random_queue.pop().ok_or_else(|| {
                    Error::InvalidConfig("no unlabeled example left to draw".into())
                })?;
                (chosen, kind, 0, Vec::new())
            }
        };

        let label = oracle.label(chosen)?;
        state.record(ds, chosen, label)?;

        let top_sum: f64 = sets.top_k.iter().map(|&j| estimates[j]).sum();
        if previous_sum == Some(top_sum) {
            unchanged += 1;
        } else {
            unchanged = 0;
        }
        previous_sum = Some(top_sum);
        let mut fired = false;
        if let (Phase::Adaptive, Some(lambda)) = (&phase, cfg.lambda) {
            if unchanged >= lambda {
                fired = true;
                trace.safeguard_step = Some(step);
                phase = Phase::Random(StepKind::SafeguardFallback);
                random_queue = shuffled_unlabeled(&state, &mut rng);
            }
        }

        trace.steps.push(TraceStep {
            step,
            chosen,
            label,
            kind,
            top_k: sets.top_k,
            candidates,
            scored_examples: scored,
            estimates: cfg.record_estimates.then_some(estimates),
            safeguard_fired: fired,
        });
    }

    trace.unspent = cfg.budget - state.order.len();
    let final_estimates: Vec<f64> = state
        .states
        .iter()
        .enumerate()
        .map(|(j, st)| estimate_entropy(marg.feature(j), st))
        .collect();
    Ok(AfsOutcome {
        selected: top_k_smallest(&final_estimates, cfg.k),
        estimates: final_estimates,
        labeled: state.order.iter().copied().zip(state.labels.iter().copied()).collect(),
        trace,
    })
}

/// Unlabeled indices in a seeded random order, consumed from the back.
fn shuffled_unlabeled(state: &AfsState, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..state.is_labeled.len())
        .filter(|&i| !state.is_labeled[i])
        .collect();
    pool.shuffle(rng);
    pool
}

/// Highest-scoring unlabeled example (lowest index on ties) and the number of
/// examples scored.
fn argmax_unlabeled(state: &AfsState, score: impl Fn(usize) -> f64) -> (Option<usize>, usize) {
    let mut best: Option<(usize, f64)> = None;
    let mut scored = 0;
    for i in 0..state.is_labeled.len() {
        if state.is_labeled[i] {
            continue;
        }
        scored += 1;
        let s = score(i);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    (best.map(|(i, _)| i), scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{pair_probability, planted_dataset, DatasetOracle};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn triple(estimate: f64, lower: f64, upper: f64) -> EntropyTriple {
        EntropyTriple {
            estimate,
            lower,
            upper,
        }
    }

    #[test]
    fn aggregation_norms() {
        assert_eq!(Aggregation::L1.apply(&[3.0, 4.0]), 7.0);
        assert_eq!(Aggregation::L2.apply(&[3.0, 4.0]), 5.0);
        assert_eq!(Aggregation::Linf.apply(&[3.0, 4.0]), 4.0);
        assert!("l3".parse::<Aggregation>().is_err());
        assert_eq!("linf".parse::<Aggregation>().unwrap(), Aggregation::Linf);
    }

    #[test]
    fn triples_without_labels() {
        let ds = planted_dataset(50, 3, [0.1, 0.9], 1).unwrap();
        let state = AfsState::new(&ds, 0.05).unwrap();
        for t in entropy_triples(&state.states, &marginals(&ds)) {
            assert_eq!(t.estimate, 0.0);
            assert_eq!(t.lower, 0.0);
            assert_abs_diff_eq!(t.upper, LN_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn triple_upper_envelope_example() {
        let ds = QuantizedDataset::from_columns(vec![vec![0, 1]], None).unwrap();
        let mut state = AfsState::new(&ds, 0.05).unwrap();
        // Point intervals at the limits: H_u = 0.5 H_b(0.4) + 0.5 ln 2 for
        // iv_0 = (0.2, 0.4) and iv_1 = (0.5, 0.5).
        let iv0 = crate::confbounds::ConfInterval::new(0.2, 0.4).unwrap();
        let iv1 = crate::confbounds::ConfInterval::point(0.5);
        let upper = 0.5 * ucb_shaped(Shape::Hb, iv0) + 0.5 * ucb_shaped(Shape::Hb, iv1);
        assert_abs_diff_eq!(upper, 0.683_079_423_784_601, epsilon = 1e-12);
        // Sandwich holds for real labels too.
        state.record(&ds, 0, 1).unwrap();
        let t = entropy_triples(&state.states, &marginals(&ds))[0];
        assert!(t.lower <= t.estimate && t.estimate <= t.upper);
    }

    #[test]
    fn degenerate_intervals_give_no_candidates() {
        let triples = [triple(0.1, 0.1, 0.1), triple(0.3, 0.3, 0.3), triple(0.2, 0.2, 0.2)];
        let sets = candidate_set(&triples, 2);
        assert_eq!(sets.top_k, vec![0, 2]);
        assert_eq!(sets.alternative, sets.top_k);
        assert!(sets.candidates.is_empty());
    }

    #[test]
    fn overlapping_envelopes_give_candidates() {
        // F_k = {0}; adversarial values (0.4, 0.0, 0.2) -> alternative {1}
        let triples = [triple(0.1, 0.05, 0.4), triple(0.2, 0.0, 0.5), triple(0.3, 0.2, 0.6)];
        let sets = candidate_set(&triples, 1);
        assert_eq!(sets.top_k, vec![0]);
        assert_eq!(sets.alternative, vec![1]);
        assert_eq!(sets.candidates, vec![0, 1]);

        let triples = [triple(0.1, 0.0, 0.15), triple(0.2, 0.0, 0.9)];
        assert_eq!(candidate_set(&triples, 1).candidates, vec![0, 1]);

        // separated envelopes: 0.15 <= 0.18
        let triples = [triple(0.1, 0.0, 0.15), triple(0.2, 0.18, 0.9)];
        assert!(candidate_set(&triples, 1).candidates.is_empty());
    }

    #[test]
    fn bias_ratio_examples() {
        assert_eq!(bias_ratio_from(0.2, 0, 10, 100), 20.0);
        assert_eq!(bias_ratio_from(0.0, 3, 10, 100), 0.0);
        assert_eq!(bias_ratio_from(0.25, 1, 4, 100), 1.0);
        assert_eq!(bias_ratio_from(0.25, 0, 0, 100), 25.0);

        let ds =
            QuantizedDataset::from_columns(vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1]], None).unwrap();
        let mut state = AfsState::new(&ds, 0.05).unwrap();
        for i in 0..4 {
            state.record(&ds, i, 0).unwrap();
        }
        for (v1, v2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(state.bias_ratio(&ds, 0, 1, v1, v2).unwrap(), 1.0);
            assert_eq!(state.bias_ratio(&ds, 1, 0, v2, v1).unwrap(), 1.0);
        }
        assert!(state.bias_ratio(&ds, 1, 1, 0, 0).is_err());
    }

    #[test]
    fn labeled_pair_counts_track_the_labeled_set() {
        let ds = planted_dataset(60, 4, [0.2, 0.8], 5).unwrap();
        let mut state = AfsState::new(&ds, 0.05).unwrap();
        state.record(&ds, 3, 1).unwrap();
        state.sync_pairs(&ds, &[0, 2, 3]).unwrap();
        for i in [7, 11, 40] {
            state.record(&ds, i, 0).unwrap();
        }
        state.sync_pairs(&ds, &[1, 2, 3]).unwrap();
        state.record(&ds, 50, 1).unwrap();
        for (a, b) in [(1, 2), (1, 3), (2, 3)] {
            assert_eq!(state.labeled_pair_total(a, b), Some(5));
        }
        assert_eq!(state.labeled_pair_total(0, 2), None);
        // full-sample pair tables agree with direct counting
        let full = state.full_pairs[&(2, 3)].get(1, 0);
        assert_eq!(full, pair_probability(&ds, 2, 3, 1, 0).unwrap());
    }

    #[test]
    fn single_feature_score_with_one_value() {
        let ds = QuantizedDataset::from_columns(vec![vec![0, 0, 0], vec![0, 1, 0]], None).unwrap();
        let mut state = AfsState::new(&ds, 0.05).unwrap();
        let marg = marginals(&ds);
        for psi in [Aggregation::L1, Aggregation::L2, Aggregation::Linf] {
            let s = example_score(&ds, &mut state, &marg, 1, &[0], psi).unwrap();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn full_budget_labels_everything() {
        let ds = planted_dataset(80, 5, [0.1, 0.9], 3).unwrap();
        let mut oracle = DatasetOracle::new(&ds).unwrap();
        let out = afs_run(&ds, &mut oracle, &AfsConfig::new(2, 80)).unwrap();
        assert_eq!(out.labeled.len(), 80);
        assert_eq!(out.trace.unspent, 0);
        let mut seen: Vec<usize> = out.labeled.iter().map(|&(i, _)| i).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..80).collect::<Vec<_>>());
    }

    #[test]
    fn stop_after_convergence_leaves_budget_unspent() {
        let ds = planted_dataset(400, 3, [0.0, 1.0], 9).unwrap();
        let mut oracle = DatasetOracle::new(&ds).unwrap();
        let mut cfg = AfsConfig::new(1, 400);
        cfg.fill_after_convergence = false;
        cfg.lambda = None;
        let out = afs_run(&ds, &mut oracle, &cfg).unwrap();
        let converged = out.trace.converged_step.expect("envelopes should separate");
        assert_eq!(out.labeled.len(), converged - 1);
        assert_eq!(out.trace.unspent, 400 - out.labeled.len());
        assert_eq!(out.selected, vec![0]);
    }

    #[test]
    fn invalid_configurations() {
        let ds = planted_dataset(20, 3, [0.1, 0.9], 1).unwrap();
        let mut oracle = DatasetOracle::new(&ds).unwrap();
        assert!(matches!(
            afs_run(&ds, &mut oracle, &AfsConfig::new(1, 21)),
            Err(Error::BudgetExceedsPool { .. })
        ));
        assert!(afs_run(&ds, &mut oracle, &AfsConfig::new(0, 5)).is_err());
        assert!(afs_run(&ds, &mut oracle, &AfsConfig::new(4, 5)).is_err());
        let mut cfg = AfsConfig::new(1, 5);
        cfg.lambda = Some(0);
        assert!(afs_run(&ds, &mut oracle, &cfg).is_err());
    }
}
