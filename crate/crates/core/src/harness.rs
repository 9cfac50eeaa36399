//! Benchmark harness: single-feature estimation scenarios, multi-feature
//! selection comparisons and ablations, with replicate summaries and CSV output.
//!
//! Every replicate draws from its own seed derived from a master seed, runs
//! on a rayon pool (capped by `ACTFS_THREADS`), and results are reduced in
//! replicate order, so a master seed reproduces every table exactly.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::afs::{afs_run, AfsConfig, Aggregation, ScoreMode};
use crate::baselines::{exact_entropies, rank_from_labels, select_examples, selection_gap, BaselineKind};
use crate::dataset::{DatasetOracle, QuantizedDataset};
use crate::single_feature::{
    estimate_entropy, select_value, true_entropy, weights, AllocationState, BernoulliValues,
    Strategy, ValueLabelSource,
};
use crate::stats::MeanInterval;
use crate::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ACTFS_THREADS";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the sub-stream identified by `path` under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p ^ 0x5851_f42d_4c95_7f2d)))
}

/// A rayon pool sized by `ACTFS_THREADS` when set to a positive integer.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// `(win, clear_win)` for each interval against all the others.
pub fn win_flags(intervals: &[MeanInterval]) -> Vec<(bool, bool)> {
    (0..intervals.len())
        .map(|i| {
            let mut min_lower = f64::INFINITY;
            let mut min_upper = f64::INFINITY;
            for (j, other) in intervals.iter().enumerate() {
                if j != i {
                    min_lower = min_lower.min(other.lower());
                    min_upper = min_upper.min(other.upper());
                }
            }
            let me = &intervals[i];
            (me.lower() <= min_upper, me.upper() <= min_lower)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleFeatureScenario {
    pub name: String,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub budgets: Vec<usize>,
    pub replicates: usize,
    pub strategies: Vec<Strategy>,
    pub delta: f64,
}

impl SingleFeatureScenario {
    /// Uniform marginals over `q.len()` values, all nine standard strategies.
    pub fn uniform_p(name: impl Into<String>, q: Vec<f64>, budgets: Vec<usize>, replicates: usize) -> Self {
        let p = vec![1.0 / q.len() as f64; q.len()];
        Self {
            name: name.into(),
            q,
            p,
            budgets,
            replicates,
            strategies: Strategy::standard_set(),
            delta: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("scenario {}: {msg}", self.name)));
        if self.q.is_empty() || self.q.len() != self.p.len() {
            return bad(format!("q has {} entries, p has {}", self.q.len(), self.p.len()));
        }
        if self.p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (self.p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("p must be a probability vector".into());
        }
        if self.q.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return bad("q entries must lie in [0, 1]".into());
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return bad("budgets must be positive".into());
        }
        if self.replicates < 2 {
            return bad("at least 2 replicates are needed".into());
        }
        if self.strategies.is_empty() {
            return bad("no strategies".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidDelta(self.delta));
        }
        Ok(())
    }

    pub fn true_entropy(&self) -> f64 {
        true_entropy(&self.p, &self.q)
    }
}

/// Scenarios with `n` values at 1/2 and the rest at `alpha`, for every size,
/// alpha and `n`; the all-1/2 vector appears once per size.
pub fn fixed_q_family(
    sizes: &[usize],
    alphas: &[f64],
    budgets: &[usize],
    replicates: usize,
) -> Vec<SingleFeatureScenario> {
    let mut out = Vec::new();
    for &size in sizes {
        for &alpha in alphas {
            for half in 0..size {
                let mut q = vec![alpha; size - half];
                q.extend(std::iter::repeat(0.5).take(half));
                out.push(SingleFeatureScenario::uniform_p(
                    format!("fixed-v{size}-a{alpha}-n{half}"),
                    q,
                    budgets.to_vec(),
                    replicates,
                ));
            }
        }
        out.push(SingleFeatureScenario::uniform_p(
            format!("fixed-v{size}-half"),
            vec![0.5; size],
            budgets.to_vec(),
            replicates,
        ));
    }
    out
}

pub const FAMILY_SIZES: [usize; 5] = [2, 4, 6, 8, 10];
pub const FAMILY_ALPHAS: [f64; 3] = [0.1, 0.01, 0.001];

/// `per_size` scenarios per size with `q_v ~ U[0, 1/2]`, generated from `seed`.
pub fn uniform_q_family(
    sizes: &[usize],
    per_size: usize,
    budgets: &[usize],
    replicates: usize,
    seed: u64,
) -> Vec<SingleFeatureScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &size in sizes {
        for idx in 0..per_size {
            let q = (0..size).map(|_| rng.gen_range(0.0..=0.5)).collect();
            out.push(SingleFeatureScenario::uniform_p(
                format!("uniform-v{size}-{idx}"),
                q,
                budgets.to_vec(),
                replicates,
            ));
        }
    }
    out
}

/// One row of a replicate summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub budget: usize,
    pub summary: MeanInterval,
    pub win: bool,
    pub clear_win: bool,
}

/// Estimates after each of `checkpoints` (sorted ascending) labels.
fn checkpointed_estimates<S: ValueLabelSource>(
    p: &[f64],
    source: &mut S,
    checkpoints: &[usize],
    strategy: Strategy,
    delta: f64,
) -> Result<Vec<f64>> {
    let mut st = AllocationState::new(p.len(), strategy.family, delta)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let last = *checkpoints.last().unwrap_or(&0);
    for t in 1..=last {
        let w = weights(strategy.objective, p, &st)?;
        let v = select_value(&w, &st)
            .ok_or_else(|| Error::InvalidConfig("no value has positive probability".into()))?;
        st.record(v, source.draw(v)?)?;
        while next.peek() == Some(&&t) {
            out.push(estimate_entropy(p, &st));
            next.next();
        }
    }
    Ok(out)
}

/// Mean absolute estimation error per strategy and budget, with win flags
/// computed across strategies within each budget.
pub fn run_single_feature_bench(sc: &SingleFeatureScenario, seed: u64) -> Result<Vec<SummaryRow>> {
    sc.validate()?;
    let pool = thread_pool()?;
    pool.install(|| single_feature_rows(sc, seed))
}

fn single_feature_rows(sc: &SingleFeatureScenario, seed: u64) -> Result<Vec<SummaryRow>> {
    let mut budgets = sc.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let truth = sc.true_entropy();

    // errors[strategy][budget][replicate]
    let mut errors = Vec::with_capacity(sc.strategies.len());
    for (si, &strategy) in sc.strategies.iter().enumerate() {
        let per_rep: Vec<Vec<f64>> = (0..sc.replicates)
            .into_par_iter()
            .map(|r| {
                let mut src = BernoulliValues::new(sc.q.clone(), derive_seed(seed, &[si as u64, r as u64]))?;
                checkpointed_estimates(&sc.p, &mut src, &budgets, strategy, sc.delta)
            })
            .collect::<Result<_>>()?;
        let by_budget: Vec<Vec<f64>> = (0..budgets.len())
            .map(|b| per_rep.iter().map(|est| (est[b] - truth).abs()).collect())
            .collect();
        errors.push(by_budget);
    }

    let mut rows = Vec::new();
    for (b, &budget) in budgets.iter().enumerate() {
        let summaries: Vec<MeanInterval> = errors
            .iter()
            .map(|e| MeanInterval::from_samples(&e[b]))
            .collect::<Result<_>>()?;
        for ((strategy, summary), (win, clear_win)) in
            sc.strategies.iter().zip(&summaries).zip(win_flags(&summaries))
        {
            rows.push(SummaryRow {
                scenario: sc.name.clone(),
                method: strategy.name(),
                budget,
                summary: *summary,
                win,
                clear_win,
            });
        }
    }
    Ok(rows)
}

/// Run every scenario, each under a seed derived from `seed` and its position.
pub fn run_single_feature_family(scenarios: &[SingleFeatureScenario], seed: u64) -> Result<Vec<SummaryRow>> {
    let pool = thread_pool()?;
    let mut rows = Vec::new();
    for (i, sc) in scenarios.iter().enumerate() {
        sc.validate()?;
        rows.extend(pool.install(|| single_feature_rows(sc, derive_seed(seed, &[i as u64])))?);
    }
    Ok(rows)
}

/// `(clear wins, wins)` per method, in first-appearance order.
pub fn tally_wins(rows: &[SummaryRow]) -> Vec<(String, usize, usize)> {
    let mut out: Vec<(String, usize, usize)> = Vec::new();
    for row in rows {
        let pos = match out.iter().position(|(m, _, _)| *m == row.method) {
            Some(p) => p,
            None => {
                out.push((row.method.clone(), 0, 0));
                out.len() - 1
            }
        };
        out[pos].1 += usize::from(row.clear_win);
        out[pos].2 += usize::from(row.win);
    }
    out
}

pub fn write_single_feature_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "strategy", "budget", "mean_err", "ci_lo", "ci_hi", "win", "clear_win"])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.method.clone(),
            r.budget.to_string(),
            r.summary.mean.to_string(),
            r.summary.lower().to_string(),
            r.summary.upper().to_string(),
            r.win.to_string(),
            r.clear_win.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// AFS configurations compared in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AfsVariant {
    Full,
    Single,
    AvgAll,
    AvgSel,
    NoSafeguard,
}

impl AfsVariant {
    /// Apply the variant to a base configuration.
    pub fn configure(self, mut cfg: AfsConfig) -> AfsConfig {
        match self {
            AfsVariant::Full => {}
            AfsVariant::NoSafeguard => cfg.lambda = None,
            AfsVariant::Single | AfsVariant::AvgAll | AfsVariant::AvgSel => {
                cfg.lambda = None;
                cfg.mode = match self {
                    AfsVariant::Single => ScoreMode::SingleFeature,
                    AfsVariant::AvgAll => ScoreMode::AverageAll,
                    _ => ScoreMode::AverageSelected,
                };
            }
        }
        cfg
    }
}

impl fmt::Display for AfsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AfsVariant::Full => "AFS",
            AfsVariant::Single => "SINGLE",
            AfsVariant::AvgAll => "AVG-ALL",
            AfsVariant::AvgSel => "AVG-SEL",
            AfsVariant::NoSafeguard => "AFS-NOSG",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Afs(AfsVariant),
    Baseline(BaselineKind),
}

impl Method {
    pub const AFS: Method = Method::Afs(AfsVariant::Full);
    pub const RANDOM: Method = Method::Baseline(BaselineKind::Random);
    pub const CORESET: Method = Method::Baseline(BaselineKind::Coreset);

    /// AFS against the two passive baselines.
    pub fn comparison_set() -> Vec<Method> {
        vec![Method::AFS, Method::RANDOM, Method::CORESET]
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Afs(v) => v.fmt(f),
            Method::Baseline(b) => b.fmt(f),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Method::AFS,
            Method::Afs(AfsVariant::Single),
            Method::Afs(AfsVariant::AvgAll),
            Method::Afs(AfsVariant::AvgSel),
            Method::Afs(AfsVariant::NoSafeguard),
            Method::RANDOM,
            Method::CORESET,
        ];
        all.into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// The full algorithm followed by its four ablations.
pub fn ablation_variants() -> Vec<Method> {
    vec![
        Method::AFS,
        Method::Afs(AfsVariant::Single),
        Method::Afs(AfsVariant::AvgAll),
        Method::Afs(AfsVariant::AvgSel),
        Method::Afs(AfsVariant::NoSafeguard),
    ]
}

/// Shared AFS parameters for a selection benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfsSettings {
    pub delta: f64,
    pub lambda: Option<usize>,
    pub psi: Aggregation,
}

impl Default for AfsSettings {
    fn default() -> Self {
        Self {
            delta: AfsConfig::DEFAULT_DELTA,
            lambda: Some(AfsConfig::DEFAULT_LAMBDA),
            psi: Aggregation::L1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionScenario {
    pub name: String,
    /// Must carry ground-truth labels.
    pub dataset: QuantizedDataset,
    pub k: usize,
    pub budgets: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub afs: AfsSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub dataset: String,
    pub method: Method,
    pub k: usize,
    pub budget: usize,
    pub summary: MeanInterval,
    /// Gap of every replicate, in replicate order.
    pub gaps: Vec<f64>,
}

impl SelectionRow {
    pub fn zero_gap_count(&self) -> usize {
        self.gaps.iter().filter(|&&g| g == 0.0).count()
    }
}

/// Features chosen by one method run.
pub fn run_method(
    ds: &QuantizedDataset,
    method: Method,
    k: usize,
    budget: usize,
    settings: AfsSettings,
    seed: u64,
) -> Result<Vec<usize>> {
    match method {
        Method::Afs(variant) => {
            let mut cfg = AfsConfig::new(k, budget);
            cfg.delta = settings.delta;
            cfg.lambda = settings.lambda;
            cfg.psi = settings.psi;
            cfg.seed = seed;
            let cfg = variant.configure(cfg);
            let mut oracle = DatasetOracle::new(ds)?;
            Ok(afs_run(ds, &mut oracle, &cfg)?.selected)
        }
        Method::Baseline(kind) => {
            let labels = ds.labels().ok_or(Error::MissingGroundTruth)?;
            let picked = select_examples(ds, budget, kind, seed)?;
            let labeled: Vec<(usize, u8)> = picked.into_iter().map(|i| (i, labels[i])).collect();
            rank_from_labels(ds, &labeled, k)
        }
    }
}

/// Mean gap per method and budget, `replicates` runs each.
pub fn run_selection_bench(sc: &SelectionScenario, seed: u64) -> Result<Vec<SelectionRow>> {
    let ds = &sc.dataset;
    let truth = exact_entropies(ds)?;
    if sc.k == 0 || sc.k > ds.d() {
        return Err(Error::InvalidConfig(format!("k = {} must lie in [1, {}]", sc.k, ds.d())));
    }
    if sc.replicates < 2 {
        return Err(Error::InvalidConfig("at least 2 replicates are needed".into()));
    }
    if let Some(&b) = sc.budgets.iter().find(|&&b| b == 0 || b > ds.m()) {
        return Err(Error::BudgetExceedsPool {
            budget: b,
            available: ds.m(),
        });
    }
    let pool = thread_pool()?;
    let mut rows = Vec::new();
    for &method in &sc.methods {
        for &budget in &sc.budgets {
            let gaps: Vec<f64> = pool.install(|| {
                (0..sc.replicates)
                    .into_par_iter()
                    .map(|r| {
                        let s = derive_seed(seed, &[budget as u64, r as u64]);
                        let selected = run_method(ds, method, sc.k, budget, sc.afs, s)?;
                        Ok(selection_gap(&truth, &selected))
                    })
                    .collect::<Result<_>>()
            })?;
            rows.push(SelectionRow {
                dataset: sc.name.clone(),
                method,
                k: sc.k,
                budget,
                summary: MeanInterval::from_samples(&gaps)?,
                gaps,
            });
        }
    }
    Ok(rows)
}

pub fn write_selection_csv<W: Write>(rows: &[SelectionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "method", "k", "budget", "mean_gap", "ci_lo", "ci_hi"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.k.to_string(),
            r.budget.to_string(),
            r.summary.mean.to_string(),
            r.summary.lower().to_string(),
            r.summary.upper().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
