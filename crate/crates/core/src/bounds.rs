//! Converse (lower) bounds on the rate–cache function and the exactly-optimal
//! high-cache segment.
//!
//! All bounds assume i.i.d. requests, which is the only request model a
//! [`PopularityProfile`] can express.

use crate::error::{Error, Result};
use crate::numeric::{pow_complement, positive_part};
use crate::popularity::{coverage, PopularityProfile};

/// Which user-count cap applies to a corner-point set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerMode {
    /// `min{L, N}`: breakpoints of the full uniform lower bound.
    Ergodic,
    /// `min{L, ⌈N/4⌉}`: breakpoints of the relaxed bound used for the static gap.
    Static,
}

impl CornerMode {
    pub fn cap(self, n_files: usize, users: usize) -> usize {
        match self {
            CornerMode::Ergodic => users.min(n_files),
            CornerMode::Static => users.min(n_files.div_ceil(4)),
        }
    }
}

/// Breakpoints `ω_ℓ` of the uniform lower bound, listed for `ℓ = 0..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerPointSet {
    pub omega: Vec<(usize, f64)>,
    pub l_max: usize,
}

impl CornerPointSet {
    pub fn cache_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.omega.iter().map(|&(_, w)| w)
    }
}

/// Value of a max-over-users bound together with the maximizing user count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub rate: f64,
    pub argmax_users: usize,
}

/// Exactly optimal rate in the high-cache regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRate {
    pub rate: f64,
    /// Smallest cache size for which `rate` is certified optimal.
    pub regime_start: f64,
}

fn check_cache(n_files: usize, cache: f64) -> Result<()> {
    if !cache.is_finite() || cache < 0.0 || cache > n_files as f64 {
        return Err(Error::invalid(format!(
            "cache size {cache} outside [0, {n_files}]"
        )));
    }
    Ok(())
}

fn check_users(users: usize) -> Result<()> {
    if users == 0 {
        return Err(Error::invalid("at least one user is required"));
    }
    Ok(())
}

/// `Σ_n (s_n(l) - s_{n+1}(l)) (n - l·x)^+` for one fixed cooperating-set size `l`.
fn lower_bound_term(probs: &[f64], l: usize, cache: f64) -> f64 {
    let n_files = probs.len();
    let lx = l as f64 * cache;
    let mut total = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        let n = k + 1;
        let slack = positive_part(n as f64 - lx);
        if slack == 0.0 {
            continue;
        }
        let next = if n < n_files { coverage(probs[k + 1], l) } else { 0.0 };
        total += (coverage(p, l) - next) * slack;
    }
    total
}

/// Lower bound for arbitrary popularity, with the maximizing `l`.
pub fn fsn_lower_bound_detail(
    profile: &PopularityProfile,
    users: usize,
    cache: f64,
) -> Result<BoundValue> {
    check_users(users)?;
    check_cache(profile.n_files(), cache)?;
    let mut best = BoundValue {
        rate: f64::NEG_INFINITY,
        argmax_users: 1,
    };
    for l in 1..=users {
        let v = lower_bound_term(profile.probs(), l, cache);
        if v > best.rate {
            best = BoundValue {
                rate: v,
                argmax_users: l,
            };
        }
    }
    Ok(best)
}

/// `max_{l ∈ [1:L]} Σ_n (s_n(l) - s_{n+1}(l)) (n - l R_c)^+`.
pub fn fsn_lower_bound(profile: &PopularityProfile, users: usize, cache: f64) -> Result<f64> {
    fsn_lower_bound_detail(profile, users, cache).map(|b| b.rate)
}

/// `max_{l ∈ [1:cap]} (1 - (1 - 1/N)^l) (N - l R_c)^+`.
fn uniform_bound_capped(n_files: usize, cap: usize, cache: f64) -> BoundValue {
    let n = n_files as f64;
    let mut best = BoundValue {
        rate: f64::NEG_INFINITY,
        argmax_users: 1,
    };
    for l in 1..=cap {
        let v = (1.0 - pow_complement(1.0 / n, l)) * positive_part(n - l as f64 * cache);
        if v > best.rate {
            best = BoundValue {
                rate: v,
                argmax_users: l,
            };
        }
    }
    best
}

/// Closed form of [`fsn_lower_bound`] for uniform requests.
pub fn uniform_lower_bound(n_files: usize, users: usize, cache: f64) -> Result<f64> {
    check_users(users)?;
    if n_files == 0 {
        return Err(Error::invalid("at least one file is required"));
    }
    check_cache(n_files, cache)?;
    Ok(uniform_bound_capped(n_files, users, cache).rate)
}

/// Uniform lower bound with the user count capped at `min{L, ⌈N/4⌉}`.
pub fn relaxed_lower_bound(n_files: usize, users: usize, cache: f64) -> Result<f64> {
    check_users(users)?;
    if n_files == 0 {
        return Err(Error::invalid("at least one file is required"));
    }
    check_cache(n_files, cache)?;
    Ok(uniform_bound_capped(n_files, CornerMode::Static.cap(n_files, users), cache).rate)
}

/// `p_N (N - R_c)`, the optimal rate once the cache is large enough.
///
/// The regime starts at `N - 1/L` in general and at `N - N/L` for uniform profiles.
pub fn high_cache_optimal(
    profile: &PopularityProfile,
    users: usize,
    cache: f64,
) -> Result<RegimeRate> {
    check_users(users)?;
    let n = profile.n_files() as f64;
    check_cache(profile.n_files(), cache)?;
    let regime_start = if profile.is_uniform() {
        n - n / users as f64
    } else {
        n - 1.0 / users as f64
    };
    if cache < regime_start - 1e-12 {
        return Err(Error::OutOfRegime {
            cache,
            threshold: regime_start,
        });
    }
    Ok(RegimeRate {
        rate: profile.least_popular() * (n - cache),
        regime_start,
    })
}

/// Breakpoints of the uniform lower bound.
pub fn corner_points(n_files: usize, users: usize, mode: CornerMode) -> Result<CornerPointSet> {
    check_users(users)?;
    if n_files == 0 {
        return Err(Error::invalid("at least one file is required"));
    }
    let l_max = mode.cap(n_files, users);
    let n = n_files as f64;
    let mut omega = Vec::with_capacity(l_max + 1);
    omega.push((0, n));
    for l in 1..l_max {
        let ql = pow_complement(1.0 / n, l);
        omega.push((l, n * ql / (n + (l as f64 + 1.0 - n) * ql)));
    }
    omega.push((l_max, 0.0));
    Ok(CornerPointSet { omega, l_max })
}

/// Precomputed evaluator for [`fsn_lower_bound`] over many cache values.
///
/// For each `l` it stores suffix sums of `d_n = s_n(l) - s_{n+1}(l)` and
/// `n·d_n`, so one evaluation costs `O(L)` instead of `O(N L)`.
#[derive(Debug, Clone)]
pub struct LowerBoundEvaluator {
    n_files: usize,
    /// `weighted[l-1][k] = Σ_{n > k} n d_n` and `plain[l-1][k] = Σ_{n > k} d_n` (1-based n).
    weighted: Vec<Vec<f64>>,
    plain: Vec<Vec<f64>>,
}

impl LowerBoundEvaluator {
    pub fn new(profile: &PopularityProfile, users: usize) -> Result<Self> {
        check_users(users)?;
        let probs = profile.probs();
        let n_files = probs.len();
        let mut weighted = Vec::with_capacity(users);
        let mut plain = Vec::with_capacity(users);
        for l in 1..=users {
            let s: Vec<f64> = probs.iter().map(|&p| coverage(p, l)).collect();
            let mut w = vec![0.0; n_files + 1];
            let mut c = vec![0.0; n_files + 1];
            for k in (0..n_files).rev() {
                let d = s[k] - if k + 1 < n_files { s[k + 1] } else { 0.0 };
                w[k] = w[k + 1] + (k + 1) as f64 * d;
                c[k] = c[k + 1] + d;
            }
            weighted.push(w);
            plain.push(c);
        }
        Ok(Self {
            n_files,
            weighted,
            plain,
        })
    }

    pub fn users(&self) -> usize {
        self.weighted.len()
    }

    pub fn evaluate(&self, cache: f64) -> Result<BoundValue> {
        check_cache(self.n_files, cache)?;
        let mut best = BoundValue {
            rate: f64::NEG_INFINITY,
            argmax_users: 1,
        };
        for l in 1..=self.users() {
            let lx = l as f64 * cache;
            // First 1-based n with n > lx, stored at 0-based offset n - 1.
            let first = lx.floor() as usize;
            let v = if first >= self.n_files {
                0.0
            } else {
                positive_part(self.weighted[l - 1][first] - lx * self.plain[l - 1][first])
            };
            if v > best.rate {
                best = BoundValue {
                    rate: v,
                    argmax_users: l,
                };
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(n: usize) -> PopularityProfile {
        PopularityProfile::uniform(n).unwrap()
    }

    /// Direct sweep over l of the defining sum, written independently.
    fn sweep_oracle(probs: &[f64], users: usize, x: f64) -> f64 {
        let s = |n: usize, l: usize| -> f64 {
            if n >= probs.len() {
                0.0
            } else {
                1.0 - (1.0 - probs[n]).powi(l as i32)
            }
        };
        (1..=users)
            .map(|l| {
                (0..probs.len())
                    .map(|k| (s(k, l) - s(k + 1, l)) * ((k + 1) as f64 - l as f64 * x).max(0.0))
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn lower_bound_examples() {
        // l = 1: (1/2)(2 - 0.5) = 0.75; l = 2: (3/4)(2 - 1) = 0.75.
        let v = fsn_lower_bound(&uniform(2), 2, 0.5).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!((v - sweep_oracle(&[0.5, 0.5], 2, 0.5)).abs() < 1e-15);

        let z = PopularityProfile::from_zipf(6, 0.9).unwrap();
        assert_eq!(fsn_lower_bound(&z, 4, 6.0).unwrap(), 0.0);

        let single = uniform(1);
        for &x in &[0.0, 0.3, 1.0] {
            assert!((fsn_lower_bound(&single, 5, x).unwrap() - (1.0 - x)).abs() < 1e-15);
        }

        let u7 = uniform(7);
        let expected = 7.0 * (1.0 - (6.0f64 / 7.0).powi(5));
        assert!((fsn_lower_bound(&u7, 5, 0.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_range_checks() {
        assert!(fsn_lower_bound(&uniform(3), 2, -0.1).is_err());
        assert!(fsn_lower_bound(&uniform(3), 2, 3.1).is_err());
        assert!(fsn_lower_bound(&uniform(3), 0, 1.0).is_err());
        assert!(fsn_lower_bound(&uniform(3), 2, f64::NAN).is_err());
    }

    #[test]
    fn relaxed_bound_examples() {
        let v = relaxed_lower_bound(10, 15, 0.0).unwrap();
        let oracle = (1..=3)
            .map(|l| (1.0 - 0.9f64.powi(l)) * 10.0)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 2.71).abs() < 1e-12);
        assert!((relaxed_lower_bound(4, 1, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(relaxed_lower_bound(10, 15, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn high_cache_examples() {
        let r = high_cache_optimal(&uniform(2), 2, 1.0).unwrap();
        assert!((r.rate - 0.5).abs() < 1e-15);
        assert_eq!(r.regime_start, 1.0);
        assert_eq!(high_cache_optimal(&uniform(2), 2, 2.0).unwrap().rate, 0.0);

        let skewed = PopularityProfile::from_values(&[0.9, 0.1]).unwrap();
        let r = high_cache_optimal(&skewed, 10, 2.0 - 0.05).unwrap();
        assert!((r.rate - 0.005).abs() < 1e-15);
        match high_cache_optimal(&skewed, 10, 1.5) {
            Err(Error::OutOfRegime { threshold, .. }) => assert!((threshold - 1.9).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn line(n: usize, l: usize, x: f64) -> f64 {
        let n = n as f64;
        (1.0 - (1.0 - 1.0 / n).powi(l as i32)) * (n - l as f64 * x)
    }

    #[test]
    fn corner_point_examples() {
        let c = corner_points(2, 2, CornerMode::Ergodic).unwrap();
        assert_eq!(c.l_max, 2);
        let w: Vec<f64> = c.cache_values().collect();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0], 2.0);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert_eq!(w[2], 0.0);
        // Lines l = 1 and l = 2 cross at omega_1.
        assert!((line(2, 1, w[1]) - line(2, 2, w[1])).abs() < 1e-12);

        let c = corner_points(2, 1, CornerMode::Ergodic).unwrap();
        assert_eq!(c.cache_values().collect::<Vec<_>>(), vec![2.0, 0.0]);

        let c = corner_points(10, 15, CornerMode::Static).unwrap();
        assert_eq!(c.l_max, 3);
        assert_eq!(c.omega.len(), 4);
        for &(l, w) in &c.omega[1..c.l_max] {
            assert!((line(10, l, w) - line(10, l + 1, w)).abs() < 1e-9);
        }
    }

    #[test]
    fn corner_points_strictly_decreasing_and_intersecting() {
        for n in 1..=40 {
            for l in 1..=40 {
                for mode in [CornerMode::Ergodic, CornerMode::Static] {
                    let c = corner_points(n, l, mode).unwrap();
                    assert_eq!(c.omega[0].1, n as f64);
                    assert_eq!(c.omega.last().unwrap().1, 0.0);
                    assert!(c.omega.windows(2).all(|w| w[0].1 > w[1].1), "n={n} l={l}");
                    for &(k, w) in &c.omega[1..c.l_max] {
                        assert!((line(n, k, w) - line(n, k + 1, w)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn evaluator_matches_direct_sum() {
        let z = PopularityProfile::from_zipf(30, 0.8).unwrap();
        let eval = LowerBoundEvaluator::new(&z, 12).unwrap();
        for i in 0..=300 {
            let x = 30.0 * i as f64 / 300.0;
            let direct = fsn_lower_bound_detail(&z, 12, x).unwrap();
            let fast = eval.evaluate(x).unwrap();
            assert!((direct.rate - fast.rate).abs() < 1e-12, "x={x}");
            assert!((sweep_oracle(z.probs(), 12, x) - direct.rate).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn uniform_profile_matches_closed_form(n in 1usize..40, l in 1usize..40, t in 0.0f64..=1.0) {
            let x = t * n as f64;
            let general = fsn_lower_bound(&uniform(n), l, x).unwrap();
            let closed = uniform_lower_bound(n, l, x).unwrap();
            prop_assert!((general - closed).abs() <= 1e-12);
            prop_assert!(relaxed_lower_bound(n, l, x).unwrap() <= general + 1e-12);
        }

        #[test]
        fn lower_bound_convex_nonincreasing(alpha in 0.0f64..2.0, n in 1usize..15, l in 1usize..12) {
            let p = PopularityProfile::from_zipf(n, alpha).unwrap();
            let grid: Vec<f64> = (0..=60).map(|i| n as f64 * i as f64 / 60.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&x| fsn_lower_bound(&p, l, x).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            for w in vals.windows(3) {
                prop_assert!(w[0] + w[2] >= 2.0 * w[1] - 1e-9);
            }
            prop_assert!((vals[0] - p.expected_distinct(l)).abs() <= 1e-9);
        }
    }
}
