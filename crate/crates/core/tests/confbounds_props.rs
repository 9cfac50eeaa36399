#[path = "common/mod.rs"]
mod common;

use actfs_core::confbounds::{
    entropy_spread, interval, lcb_hb, ucb_shaped, BoundFamily, ConfInterval, Shape,
};
use common::cases;
use proptest::prelude::*;

const GRID: usize = 10_000;

fn grid_extrema(shape: Shape, iv: ConfInterval) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=GRID {
        let x = iv.lower + (iv.upper - iv.lower) * i as f64 / GRID as f64;
        let y = shape.eval(x);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    (lo, hi)
}

fn family() -> impl Strategy<Value = BoundFamily> {
    prop::sample::select(BoundFamily::ALL.to_vec())
}

fn counts() -> impl Strategy<Value = (u64, u64)> {
    (1u64..300).prop_flat_map(|n| (0..=n, Just(n)))
}

fn unit_interval() -> impl Strategy<Value = ConfInterval> {
    (0.0f64..=1.0, 0.0f64..=1.0)
        .prop_map(|(a, b)| ConfInterval::new(a.min(b), a.max(b)).unwrap())
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn intervals_contain_the_estimate(fam in family(), (s, n) in counts(), delta in 0.001f64..0.999) {
        let iv = interval(fam, s, n, delta).unwrap();
        let q = s as f64 / n as f64;
        prop_assert!(0.0 <= iv.lower && iv.lower <= q && q <= iv.upper && iv.upper <= 1.0);
    }

    #[test]
    fn smaller_delta_never_narrows(
        fam in family(),
        (s, n) in counts(),
        d1 in 0.001f64..0.999,
        d2 in 0.001f64..0.999,
    ) {
        let (small, large) = (d1.min(d2), d1.max(d2));
        let wide = interval(fam, s, n, small).unwrap();
        let narrow = interval(fam, s, n, large).unwrap();
        prop_assert!(wide.lower <= narrow.lower + 1e-9, "{wide} vs {narrow}");
        prop_assert!(wide.upper >= narrow.upper - 1e-9, "{wide} vs {narrow}");
    }

    #[test]
    fn upper_envelopes_match_grid(iv in unit_interval()) {
        for shape in [Shape::Hb, Shape::Fvar, Shape::G] {
            let (_, grid_max) = grid_extrema(shape, iv);
            let ucb = ucb_shaped(shape, iv);
            prop_assert!(ucb >= grid_max - 1e-12, "{shape:?} {iv}: {ucb} < {grid_max}");
            prop_assert!(ucb - grid_max <= 1e-6, "{shape:?} {iv}: {ucb} vs {grid_max}");
        }
    }

    #[test]
    fn lower_envelope_matches_grid(iv in unit_interval()) {
        let (grid_min, _) = grid_extrema(Shape::Hb, iv);
        let lcb = lcb_hb(iv);
        prop_assert!(lcb <= grid_min + 1e-12);
        prop_assert!(grid_min - lcb <= 1e-6);
    }

    #[test]
    fn spread_is_symmetric(x in 0.0f64..=1.0) {
        prop_assert!((entropy_spread(x) - entropy_spread(1.0 - x)).abs() <= 1e-12);
        prop_assert!(entropy_spread(x) >= 0.0);
    }
}

#[test]
fn spread_vanishes_at_the_ends_and_middle() {
    assert_eq!(entropy_spread(0.5), 0.0);
    assert!(entropy_spread(1e-300) < 1e-140);
    assert!(entropy_spread(1.0 - 1e-16) < 1e-6);
    assert_eq!(entropy_spread(0.0), 0.0);
    assert_eq!(entropy_spread(1.0), 0.0);
}

/// Every property in this file, for callers that run them outside the test harness.
#[allow(dead_code)]
pub const PROPERTIES: &[(&str, fn())] = &[
    ("intervals_contain_the_estimate", intervals_contain_the_estimate),
    ("smaller_delta_never_narrows", smaller_delta_never_narrows),
    ("upper_envelopes_match_grid", upper_envelopes_match_grid),
    ("lower_envelope_matches_grid", lower_envelope_matches_grid),
    ("spread_is_symmetric", spread_is_symmetric),
    ("spread_vanishes_at_the_ends_and_middle", spread_vanishes_at_the_ends_and_middle),
];
