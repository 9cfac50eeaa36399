//! Confidence intervals for a Bernoulli parameter and confidence envelopes of
//! the three shape functions used by the allocation strategies.
//!
//! All logarithms are natural logarithms.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use statrs::function::beta::beta_reg;

use crate::{Error, Result};

/// Absolute tolerance of the Clopper-Pearson root bisection.
const CP_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance of the bisection locating the interior mode of `g`.
const PHI_TOLERANCE: f64 = 1e-12;
/// Memoized Clopper-Pearson intervals per thread before the memo is reset.
const CP_MEMO_LIMIT: usize = 1 << 20;

thread_local! {
    static CP_MEMO: RefCell<HashMap<(u64, u64, u64), ConfInterval>> = RefCell::new(HashMap::new());
}

/// A `(lower, upper)` bound pair on a Bernoulli parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConfInterval {
    /// The interval used before any sample is observed.
    pub const UNINFORMED: ConfInterval = ConfInterval {
        lower: 0.0,
        upper: 1.0,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower > upper {
            return Err(Error::InvalidConfig(format!(
                "invalid interval [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn point(q: f64) -> Self {
        Self { lower: q, upper: q }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

impl fmt::Display for ConfInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}]", self.lower, self.upper)
    }
}

/// Concentration inequality used to bound a Bernoulli parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundFamily {
    Hoeffding,
    Bernstein,
    ClopperPearson,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 3] = [
        BoundFamily::Hoeffding,
        BoundFamily::Bernstein,
        BoundFamily::ClopperPearson,
    ];

    /// Short suffix used in strategy names (`H`, `B`, `CP`).
    pub fn suffix(self) -> &'static str {
        match self {
            BoundFamily::Hoeffding => "H",
            BoundFamily::Bernstein => "B",
            BoundFamily::ClopperPearson => "CP",
        }
    }
}

impl FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "hoeffding" => Ok(BoundFamily::Hoeffding),
            "b" | "bernstein" => Ok(BoundFamily::Bernstein),
            "cp" | "clopper-pearson" | "clopperpearson" => Ok(BoundFamily::ClopperPearson),
            other => Err(Error::InvalidConfig(format!("unknown bound family `{other}`"))),
        }
    }
}

/// Two-sided interval on a Bernoulli parameter from `successes` out of `n`
/// draws at confidence level `delta`.
pub fn interval(family: BoundFamily, successes: u64, n: u64, delta: f64) -> Result<ConfInterval> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if successes > n {
        return Err(Error::InvalidCounts {
            successes,
            trials: n,
        });
    }
    if n == 0 {
        return Ok(ConfInterval::UNINFORMED);
    }
    let nf = n as f64;
    let q_hat = successes as f64 / nf;
    let iv = match family {
        BoundFamily::Hoeffding => {
            let radius = ((2.0 / delta).ln() / (2.0 * nf)).sqrt();
            clipped(q_hat - radius, q_hat + radius)
        }
        BoundFamily::Bernstein => {
            let log_term = (3.0 / delta).ln();
            let radius =
                (2.0 * q_hat * (1.0 - q_hat) * log_term / nf).sqrt() + 3.0 * log_term / nf;
            clipped(q_hat - radius, q_hat + radius)
        }
        BoundFamily::ClopperPearson => memoized_clopper_pearson(successes, n, delta),
    };
    Ok(iv)
}

fn clipped(lower: f64, upper: f64) -> ConfInterval {
    ConfInterval {
        lower: lower.max(0.0),
        upper: upper.min(1.0),
    }
}

/// `P[Bin(n, q) >= s]` for `1 <= s <= n`.
fn upper_tail(s: u64, n: u64, q: f64) -> f64 {
    beta_reg(s as f64, (n - s + 1) as f64, q)
}

/// `P[Bin(n, q) <= s]` for `0 <= s < n`.
fn lower_tail(s: u64, n: u64, q: f64) -> f64 {
    1.0 - beta_reg((s + 1) as f64, (n - s) as f64, q)
}

fn memoized_clopper_pearson(s: u64, n: u64, delta: f64) -> ConfInterval {
    let key = (s, n, delta.to_bits());
    CP_MEMO.with(|memo| {
        if let Some(&iv) = memo.borrow().get(&key) {
            return iv;
        }
        let iv = clopper_pearson(s, n, delta);
        let mut memo = memo.borrow_mut();
        if memo.len() >= CP_MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(key, iv);
        iv
    })
}

fn clopper_pearson(s: u64, n: u64, delta: f64) -> ConfInterval {
    let half = delta / 2.0;
    let lower = if s == 0 {
        0.0
    } else {
        // upper_tail is increasing in q; keep `lo` on the side where it is <= half.
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > CP_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if upper_tail(s, n, mid) > half {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };
    let upper = if s == n {
        1.0
    } else {
        // lower_tail is decreasing in q; keep `hi` on the side where it is <= half.
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > CP_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if lower_tail(s, n, mid) > half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    ConfInterval { lower, upper }
}

/// Binary entropy in nats, with `0 log(1/0) = 0`.
pub fn binary_entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -q * q.ln() - (1.0 - q) * (1.0 - q).ln()
}

/// Bernoulli variance `x (1 - x)`.
pub fn bernoulli_variance(x: f64) -> f64 {
    x * (1.0 - x)
}

/// `g(x) = sqrt(x(1-x)) |ln(x / (1-x))|`, the first-order standard deviation
/// factor of the plug-in binary entropy. Zero at 0, 1/2 and 1.
pub fn entropy_spread(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    (x * (1.0 - x)).sqrt() * (x / (1.0 - x)).ln().abs()
}

/// The interior mode of [`entropy_spread`] on `(0, 1/2)`, approximately 0.0832.
///
/// Setting the derivative of `g` to zero on `(0, 1/2)` reduces to
/// `(1 - 2x) ln((1 - x) / x) = 2`, whose left side decreases from `+inf` to 0.
pub fn phi() -> f64 {
    static PHI: OnceLock<f64> = OnceLock::new();
    *PHI.get_or_init(|| {
        let h = |x: f64| (1.0 - 2.0 * x) * ((1.0 - x) / x).ln() - 2.0;
        let (mut lo, mut hi) = (1e-6_f64, 0.5_f64);
        while hi - lo > PHI_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Shape functions of a Bernoulli parameter whose confidence envelopes are needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Binary entropy `H_b`.
    Hb,
    /// Bernoulli variance `x(1-x)`.
    Fvar,
    /// Entropy spread `g`.
    G,
}

impl Shape {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Shape::Hb => binary_entropy(x),
            Shape::Fvar => bernoulli_variance(x),
            Shape::G => entropy_spread(x),
        }
    }
}

/// Maximum of `shape` over `[iv.lower, iv.upper]`.
pub fn ucb_shaped(shape: Shape, iv: ConfInterval) -> f64 {
    match shape {
        // unimodal with the mode at 1/2
        Shape::Hb | Shape::Fvar => {
            if iv.lower <= 0.5 && 0.5 <= iv.upper {
                shape.eval(0.5)
            } else if iv.lower > 0.5 {
                shape.eval(iv.lower)
            } else {
                shape.eval(iv.upper)
            }
        }
        // increasing on [0, phi] and [1/2, 1 - phi], decreasing elsewhere
        Shape::G => {
            let phi = phi();
            if iv.contains(phi) || iv.contains(1.0 - phi) {
                entropy_spread(phi)
            } else {
                entropy_spread(iv.lower).max(entropy_spread(iv.upper))
            }
        }
    }
}

/// Minimum of the binary entropy over `[iv.lower, iv.upper]`.
pub fn lcb_hb(iv: ConfInterval) -> f64 {
    binary_entropy(iv.lower).min(binary_entropy(iv.upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Direct binomial pmf summation, independent of the incomplete beta route.
    fn brute_tail_ge(s: u64, n: u64, q: f64) -> f64 {
        (s..=n)
            .map(|i| choose(n, i) * q.powi(i as i32) * (1.0 - q).powi((n - i) as i32))
            .sum()
    }

    #[test]
    fn empty_sample_is_uninformed() {
        for family in BoundFamily::ALL {
            assert_eq!(interval(family, 0, 0, 0.05).unwrap(), ConfInterval::UNINFORMED);
        }
    }

    #[test]
    fn hoeffding_half_width() {
        let iv = interval(BoundFamily::Hoeffding, 5, 10, 0.05).unwrap();
        assert_abs_diff_eq!(iv.lower, 0.5 - 0.429_469_408_346_737_6, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.upper, 0.5 + 0.429_469_408_346_737_6, epsilon = 1e-12);
    }

    #[test]
    fn clopper_pearson_goldens() {
        // frozen from an exact binomial-sum bisection
        let cases = [
            (3, 10, 0.066_739_511_178, 0.652_452_850_060),
            (0, 10, 0.0, 0.308_497_107_819),
            (10, 10, 0.691_502_892_181, 1.0),
            (7, 20, 0.153_909_204_785, 0.592_188_534_533),
            (1, 5, 0.005_050_763_379, 0.716_417_936_118),
        ];
        for (s, n, lo, hi) in cases {
            let iv = interval(BoundFamily::ClopperPearson, s, n, 0.05).unwrap();
            assert_abs_diff_eq!(iv.lower, lo, epsilon = 2e-9);
            assert_abs_diff_eq!(iv.upper, hi, epsilon = 2e-9);
        }
        let closed_form = 1.0 - 0.025_f64.powf(0.1);
        let iv = interval(BoundFamily::ClopperPearson, 0, 10, 0.05).unwrap();
        assert_abs_diff_eq!(iv.upper, closed_form, epsilon = 2e-9);
    }

    #[test]
    fn clopper_pearson_roots_satisfy_the_tail_equation() {
        for n in [1u64, 4, 17, 40] {
            for s in 1..n {
                let iv = interval(BoundFamily::ClopperPearson, s, n, 0.1).unwrap();
                assert_abs_diff_eq!(brute_tail_ge(s, n, iv.lower), 0.05, epsilon = 1e-7);
                let le = 1.0 - brute_tail_ge(s + 1, n, iv.upper);
                assert_abs_diff_eq!(le, 0.05, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            interval(BoundFamily::Hoeffding, 1, 2, 0.0),
            Err(Error::InvalidDelta(_))
        ));
        assert!(matches!(
            interval(BoundFamily::Bernstein, 1, 2, 1.0),
            Err(Error::InvalidDelta(_))
        ));
        assert!(matches!(
            interval(BoundFamily::ClopperPearson, 3, 2, 0.05),
            Err(Error::InvalidCounts { .. })
        ));
    }

    #[test]
    fn bernstein_is_clipped() {
        let iv = interval(BoundFamily::Bernstein, 0, 3, 0.05).unwrap();
        assert_eq!(iv.lower, 0.0);
        assert!(iv.upper <= 1.0);
    }

    #[test]
    fn phi_and_its_spread() {
        assert_abs_diff_eq!(phi(), 0.083_221_720_199_517_65, epsilon = 1e-11);
        assert_abs_diff_eq!(entropy_spread(phi()), 0.662_743_419_349_181_6, epsilon = 1e-12);
    }

    #[test]
    fn envelope_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert_abs_diff_eq!(ucb_shaped(Shape::Hb, ConfInterval::new(0.3, 0.7).unwrap()), ln2);
        assert_abs_diff_eq!(
            ucb_shaped(Shape::Fvar, ConfInterval::new(0.0, 0.2).unwrap()),
            0.16,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ucb_shaped(Shape::G, ConfInterval::new(0.05, 0.12).unwrap()),
            0.662_743_419_349_181_6,
            epsilon = 1e-9
        );
        assert_eq!(lcb_hb(ConfInterval::UNINFORMED), 0.0);
        assert_abs_diff_eq!(lcb_hb(ConfInterval::point(0.5)), ln2);
        assert_abs_diff_eq!(
            lcb_hb(ConfInterval::new(0.2, 0.4).unwrap()),
            0.500_402_423_538_187_9,
            epsilon = 1e-12
        );
    }

    #[test]
    fn spread_is_symmetric_and_vanishes_at_the_ends() {
        assert_eq!(entropy_spread(0.0), 0.0);
        assert_eq!(entropy_spread(0.5), 0.0);
        assert_eq!(entropy_spread(1.0), 0.0);
        assert!(entropy_spread(1e-12) < 1e-4);
        assert!(entropy_spread(1.0 - 1e-12) < 1e-4);
        for i in 1..1000 {
            let x = i as f64 / 1000.0;
            assert_abs_diff_eq!(entropy_spread(x), entropy_spread(1.0 - x), epsilon = 1e-12);
        }
    }
}
