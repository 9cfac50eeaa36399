//! Active estimation of one feature's conditional entropy.
//!
//! The value marginals `p_v` are known; each step picks a value `v`, draws one
//! label from `Y | X = v`, and the final estimate is the plug-in
//! `sum_v p_v H_b(q_hat_v)`. Strategies differ in the static allocation they
//! try to track:
//!
//! | objective  | target allocation                  |
//! |------------|------------------------------------|
//! | `Prop`     | `p_v`                              |
//! | `MaxLinf`  | `UCB(q(1-q))`                      |
//! | `Variance` | `p_v sqrt(UCB(q(1-q)))`            |
//! | `Entropy`  | `p_v UCB(g)`                       |
//!
//! and the next value is the one furthest below its target, `argmax w(v)/n(v)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::confbounds::{binary_entropy, interval, ucb_shaped, BoundFamily, ConfInterval, Shape};
use crate::{Error, Result};

/// Per-value label statistics for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    counts: Vec<u64>,
    positives: Vec<u64>,
    intervals: Vec<ConfInterval>,
    family: BoundFamily,
    delta: f64,
}

impl AllocationState {
    pub fn new(values: usize, family: BoundFamily, delta: f64) -> Result<Self> {
        if values == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidDelta(delta));
        }
        Ok(Self {
            counts: vec![0; values],
            positives: vec![0; values],
            intervals: vec![ConfInterval::UNINFORMED; values],
            family,
            delta,
        })
    }

    /// Add one label observed for value `v` and refresh its interval.
    pub fn record(&mut self, v: usize, label: u8) -> Result<()> {
        if v >= self.counts.len() {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: self.counts.len(),
            });
        }
        self.counts[v] += 1;
        self.positives[v] += u64::from(label != 0);
        self.intervals[v] = interval(self.family, self.positives[v], self.counts[v], self.delta)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, v: usize) -> u64 {
        self.counts[v]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn positives(&self, v: usize) -> u64 {
        self.positives[v]
    }

    /// Plug-in estimate `s/n`, or 0 for an unlabeled value.
    pub fn q_hat(&self, v: usize) -> f64 {
        match self.counts[v] {
            0 => 0.0,
            n => self.positives[v] as f64 / n as f64,
        }
    }

    pub fn interval(&self, v: usize) -> ConfInterval {
        self.intervals[v]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn family(&self) -> BoundFamily {
        self.family
    }
}

/// Error measure whose static allocation a strategy tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Prop,
    MaxLinf,
    Variance,
    Entropy,
}

/// Normalized target allocation over the values of one feature.
///
/// Values with `p_v = 0` get weight 0. When every weight would be 0 the
/// proportional allocation is returned instead.
pub fn weights(objective: Objective, p: &[f64], st: &AllocationState) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    if p.len() != st.len() {
        return Err(Error::InvalidConfig(format!(
            "{} marginals for {} values",
            p.len(),
            st.len()
        )));
    }
    let raw: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(v, &pv)| {
            if pv <= 0.0 {
                return 0.0;
            }
            let iv = st.interval(v);
            match objective {
                Objective::Prop => pv,
                Objective::MaxLinf => ucb_shaped(Shape::Fvar, iv),
                Objective::Variance => pv * ucb_shaped(Shape::Fvar, iv).sqrt(),
                Objective::Entropy => pv * ucb_shaped(Shape::G, iv),
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        return Ok(raw.into_iter().map(|w| w / total).collect());
    }
    let total: f64 = p.iter().filter(|&&pv| pv > 0.0).sum();
    if total <= 0.0 {
        return Err(Error::InvalidConfig("all value marginals are zero".into()));
    }
    Ok(p.iter().map(|&pv| pv.max(0.0) / total).collect())
}

/// The value furthest below its target share: `argmax_v w(v) / n(v)`.
///
/// An unlabeled value with positive weight has infinite priority. An unlabeled
/// value with zero weight is unrealizable and never chosen. Ties go to the
/// lowest index.
pub fn select_value(w: &[f64], st: &AllocationState) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (v, &wv) in w.iter().enumerate() {
        let n = st.count(v);
        let priority = match n {
            0 if wv > 0.0 => f64::INFINITY,
            0 => continue,
            n => wv / n as f64,
        };
        if best.map_or(true, |(_, b)| priority > b) {
            best = Some((v, priority));
        }
    }
    best.map(|(v, _)| v)
}

/// Plug-in conditional entropy `sum_v p_v H_b(q_hat_v)` in nats.
pub fn estimate_entropy(p: &[f64], st: &AllocationState) -> f64 {
    p.iter()
        .enumerate()
        .map(|(v, &pv)| pv * binary_entropy(st.q_hat(v)))
        .sum()
}

/// Exact conditional entropy `sum_v p_v H_b(q_v)`.
pub fn true_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&pv, &qv)| pv * binary_entropy(qv)).sum()
}

/// An allocation objective paired with the bound family used for its UCBs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategy {
    pub objective: Objective,
    pub family: BoundFamily,
}

impl Strategy {
    pub const fn new(objective: Objective, family: BoundFamily) -> Self {
        Self { objective, family }
    }

    pub const PROP: Strategy = Strategy::new(Objective::Prop, BoundFamily::ClopperPearson);
    pub const I_CP: Strategy = Strategy::new(Objective::Entropy, BoundFamily::ClopperPearson);

    /// PROP, MAX-H, MAX-B, VAR-H, VAR-B, VAR-CP, I-H, I-B, I-CP.
    pub fn standard_set() -> Vec<Strategy> {
        use BoundFamily::*;
        use Objective::*;
        vec![
            Strategy::new(Prop, ClopperPearson),
            Strategy::new(MaxLinf, Hoeffding),
            Strategy::new(MaxLinf, Bernstein),
            Strategy::new(Variance, Hoeffding),
            Strategy::new(Variance, Bernstein),
            Strategy::new(Variance, ClopperPearson),
            Strategy::new(Entropy, Hoeffding),
            Strategy::new(Entropy, Bernstein),
            Strategy::new(Entropy, ClopperPearson),
        ]
    }

    pub fn name(&self) -> String {
        let prefix = match self.objective {
            Objective::Prop => return "PROP".into(),
            Objective::MaxLinf => "MAX",
            Objective::Variance => "VAR",
            Objective::Entropy => "I",
        };
        format!("{prefix}-{}", self.family.suffix())
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        if upper == "PROP" {
            return Ok(Strategy::PROP);
        }
        let (prefix, suffix) = upper
            .split_once('-')
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))?;
        let objective = match prefix {
            "MAX" => Objective::MaxLinf,
            "VAR" => Objective::Variance,
            "I" => Objective::Entropy,
            _ => return Err(Error::InvalidConfig(format!("unknown strategy `{s}`"))),
        };
        Ok(Strategy::new(objective, suffix.parse()?))
    }
}

/// Draws labels of `Y | X = v` for a chosen value.
pub trait ValueLabelSource {
    fn draw(&mut self, value: usize) -> Result<u8>;
}

/// `Y | X = v ~ Bernoulli(q_v)` with a seeded stream.
#[derive(Debug, Clone)]
pub struct BernoulliValues {
    q: Vec<f64>,
    rng: ChaCha8Rng,
}

impl BernoulliValues {
    pub fn new(q: Vec<f64>, seed: u64) -> Result<Self> {
        if q.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("Bernoulli parameters must lie in [0, 1]".into()));
        }
        Ok(Self {
            q,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl ValueLabelSource for BernoulliValues {
    fn draw(&mut self, value: usize) -> Result<u8> {
        let q = *self.q.get(value).ok_or(Error::IndexOutOfRange {
            index: value,
            len: self.q.len(),
        })?;
        Ok(u8::from(self.rng.gen::<f64>() < q))
    }
}

/// Outcome of one single-feature estimation run.
#[derive(Debug, Clone)]
pub struct SingleFeatureRun {
    pub estimate: f64,
    pub state: AllocationState,
    /// Value chosen at each step.
    pub choices: Vec<usize>,
}

/// Spend `budget` labels on one feature following `strategy`.
pub fn run_single_feature<S: ValueLabelSource + ?Sized>(
    p: &[f64],
    source: &mut S,
    budget: usize,
    strategy: Strategy,
    delta: f64,
) -> Result<SingleFeatureRun> {
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be at least 1".into()));
    }
    let mut state = AllocationState::new(p.len(), strategy.family, delta)?;
    let mut choices = Vec::with_capacity(budget);
    for _ in 0..budget {
        let w = weights(strategy.objective, p, &state)?;
        let v = select_value(&w, &state)
            .ok_or_else(|| Error::InvalidConfig("no value has positive probability".into()))?;
        let y = source.draw(v)?;
        state.record(v, y)?;
        choices.push(v);
    }
    Ok(SingleFeatureRun {
        estimate: estimate_entropy(p, &state),
        state,
        choices,
    })
}
