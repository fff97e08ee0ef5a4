//! Library evaluators against the independent reference computations in
//! `common`, in exact arithmetic.

mod common;

use coded_caching::centralized::{self, greedy_optimize_in, kappa_in, static_rate_by_levels_in};
use coded_caching::decentralized::{self, static_rate_by_values_in};
use coded_caching::exact::Rational;
use coded_caching::simulator::{ergodic_rate_oracle_in, OracleLevels};
use common::*;
use proptest::prelude::*;

fn profile_from(weights: &[u8]) -> Vec<Rational> {
    let mut w: Vec<i64> = weights.iter().map(|&x| i64::from(x) + 1).collect();
    w.sort_unstable_by(|a, b| b.cmp(a));
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

#[test]
fn kappa_small_values() {
    let half = q(1, 2);
    assert_eq!(kappa_in(0, &half, 2), q(3, 4));
    assert_eq!(kappa_in(1, &half, 2), q(1, 4));
    assert_eq!(kappa_in(2, &half, 2), q(0, 1));
}

#[test]
fn two_user_ergodic_examples() {
    let uniform = vec![q(1, 2), q(1, 2)];
    assert_eq!(centralized::ergodic_rate_in(&uniform, &[1, 0], 2), q(1, 1));
    assert_eq!(ergodic_centralized_enumerated(&uniform, &[1, 0], 2), q(1, 1));
    let half = vec![q(1, 2), q(1, 2)];
    assert_eq!(decentralized::ergodic_rate_in(&uniform, &half, 2), q(5, 8));
    assert_eq!(ergodic_decentralized_enumerated(&uniform, &half, 2), q(5, 8));
}

#[test]
fn empty_caches_cost_the_expected_number_of_distinct_files() {
    let probs = zipf_rational(3, 1);
    let users = 3;
    let expected: Rational = probs
        .iter()
        .map(|p| {
            let miss = (0..users).fold(q(1, 1), |acc, _| acc * (q(1, 1) - p));
            q(1, 1) - miss
        })
        .sum();
    assert_eq!(centralized::ergodic_rate_in(&probs, &[0, 0, 0], users), expected);
    assert_eq!(
        decentralized::ergodic_rate_in(&probs, &[q(0, 1), q(0, 1), q(0, 1)], users),
        expected
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_matches_binomial_sum(users in 1usize..9, num in 0i64..=12) {
        let p = q(num, 12);
        for r in 0..=users {
            prop_assert_eq!(kappa_in(r, &p, users), kappa_direct(r, &p, users));
        }
    }

    #[test]
    fn centralized_closed_form_matches_enumeration(
        weights in prop::collection::vec(any::<u8>(), 1..=3),
        users in 1usize..=3,
        raw in prop::collection::vec(0usize..=3, 3),
    ) {
        let probs = profile_from(&weights);
        let levels: Vec<usize> = raw.iter().take(probs.len()).map(|&r| r.min(users)).collect();
        let closed = centralized::ergodic_rate_in(&probs, &levels, users);
        prop_assert_eq!(&closed, &ergodic_centralized_enumerated(&probs, &levels, users));
        prop_assert_eq!(&closed, &ergodic_rate_oracle_in(&probs, OracleLevels::Integer(&levels), users).unwrap());
    }

    #[test]
    fn decentralized_closed_form_matches_enumeration(
        weights in prop::collection::vec(any::<u8>(), 1..=3),
        users in 1usize..=3,
        raw in prop::collection::vec(0i64..=6, 3),
    ) {
        let probs = profile_from(&weights);
        let levels: Vec<Rational> = raw.iter().take(probs.len()).map(|&k| q(k, 6)).collect();
        let closed = decentralized::ergodic_rate_in(&probs, &levels, users);
        prop_assert_eq!(&closed, &ergodic_decentralized_enumerated(&probs, &levels, users));
        prop_assert_eq!(&closed, &ergodic_rate_oracle_in(&probs, OracleLevels::Fractional(&levels), users).unwrap());
    }

    #[test]
    fn grouped_static_rates_match_subsets(
        users in 1usize..=8,
        raw in prop::collection::vec((0usize..=8, 0i64..=10), 8),
    ) {
        let levels: Vec<usize> = raw.iter().take(users).map(|&(r, _)| r.min(users)).collect();
        prop_assert_eq!(static_rate_by_levels_in::<Rational>(&levels, users), static_centralized_by_subsets(&levels));
        let values: Vec<Rational> = raw.iter().take(users).map(|&(_, k)| q(k, 10)).collect();
        prop_assert_eq!(static_rate_by_values_in::<Rational>(&values, users), static_decentralized_by_subsets(&values));
    }

    #[test]
    fn greedy_reaches_exhaustive_minimum(
        weights in prop::collection::vec(any::<u8>(), 1..=4),
        users in 1usize..=3,
        fill in 0.0f64..=1.0,
    ) {
        let probs = profile_from(&weights);
        let steps = (fill * (probs.len() * users) as f64).round() as usize;
        let (_, rate) = greedy_optimize_in(&probs, users, steps);
        prop_assert_eq!(rate, exhaustive_centralized_minimum(&probs, users, steps));
    }
}
