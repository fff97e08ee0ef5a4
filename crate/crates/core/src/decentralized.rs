//! Decentralized coded caching: each user caches every bit of file `n`
//! independently with probability `r_n`.
//!
//! Includes the ergodic rate, the optimal allocation under a cache budget
//! (a convex program solved through its KKT conditions), and the static
//! per-request, average and worst-case rates.

use serde::{Deserialize, Serialize};

use crate::centralized::AllocationRecord;
use crate::error::{Error, Result};
use crate::numeric::{binomial, neumaier_sum, pow_complement, powu_f64, Real};
use crate::popularity::PopularityProfile;
use crate::request::{expectation_over_requests, worst_case_search, Estimate, RequestVector, WorstCase};

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    r: Vec<f64>,
    users: usize,
}

impl FractionalAllocation {
    pub fn new(r: Vec<f64>, users: usize) -> Result<Self> {
        if users == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        if r.is_empty() {
            return Err(Error::invalid("allocation needs at least one file"));
        }
        if let Some((i, v)) = r
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidInput {
                index: Some(i),
                reason: format!("caching probability {v} outside [0, 1]"),
            });
        }
        Ok(Self { r, users })
    }

    /// `r_n = R_c / N` for every file.
    pub fn uniform(n_files: usize, users: usize, cache: f64) -> Result<Self> {
        check_cache(n_files, cache)?;
        Self::new(vec![(cache / n_files as f64).clamp(0.0, 1.0); n_files], users)
    }

    /// Caching probabilities in sorted-popularity order.
    pub fn levels(&self) -> &[f64] {
        &self.r
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn n_files(&self) -> usize {
        self.r.len()
    }

    /// Normalized per-user cache size `Σ r_n`.
    pub fn cache(&self) -> f64 {
        neumaier_sum(self.r.iter().copied())
    }

    fn check_profile(&self, profile: &PopularityProfile) -> Result<()> {
        if profile.n_files() != self.n_files() {
            return Err(Error::DimensionMismatch {
                expected: profile.n_files(),
                actual: self.n_files(),
            });
        }
        Ok(())
    }

    pub fn to_record(&self, profile: &PopularityProfile) -> AllocationRecord<f64> {
        AllocationRecord {
            users: self.users,
            r: profile.to_original_order(&self.r),
        }
    }

    pub fn from_record(record: &AllocationRecord<f64>, profile: &PopularityProfile) -> Result<Self> {
        if record.r.len() != profile.n_files() {
            return Err(Error::DimensionMismatch {
                expected: profile.n_files(),
                actual: record.r.len(),
            });
        }
        Self::new(profile.from_original_order(&record.r), record.users)
    }
}

fn check_cache(n_files: usize, cache: f64) -> Result<()> {
    if !(cache >= 0.0 && cache <= n_files as f64) {
        return Err(Error::invalid(format!(
            "cache size {cache} outside [0, {n_files}]"
        )));
    }
    Ok(())
}

/// One file's contribution `p (1-r) (1 - α^L) / (1 - α)`, `α = (1-p)(1-r)`.
fn ergodic_term(p: f64, r: f64, users: usize) -> f64 {
    let miss = p + r * (1.0 - p);
    let keep = p * (1.0 - r);
    if miss < 1e-12 {
        return keep * users as f64;
    }
    keep * (1.0 - pow_complement(miss, users)) / miss
}

/// Ergodic decentralized rate; also the objective of [`kkt_optimize`].
pub fn ergodic_rate(profile: &PopularityProfile, alloc: &FractionalAllocation) -> Result<f64> {
    alloc.check_profile(profile)?;
    let users = alloc.users();
    Ok(neumaier_sum(
        profile
            .probs()
            .iter()
            .zip(alloc.levels())
            .map(|(&p, &r)| ergodic_term(p, r, users)),
    ))
}

/// [`ergodic_rate`] in any scalar, through the unsummed series
/// `Σ_n p_n Σ_{ℓ<L} (1-p_n)^ℓ (1-r_n)^{ℓ+1}`.
pub fn ergodic_rate_in<T: Real>(probs: &[T], levels: &[T], users: usize) -> T {
    let mut total = T::zero();
    for (p, r) in probs.iter().zip(levels) {
        let keep = T::one() - r.clone();
        let a = (T::one() - p.clone()) * keep.clone();
        let mut power = T::one();
        let mut series = T::zero();
        for _ in 0..users {
            series = series + power.clone();
            power = power * a.clone();
        }
        total = total + p.clone() * keep * series;
    }
    total
}

/// Marginal decrease of the rate in `r_n`:
/// `g_n(r) = p_n Σ_{ℓ<L} (ℓ+1) ((1-p_n)(1-r))^ℓ`.
pub fn marginal_gain(p: f64, r: f64, users: usize) -> f64 {
    let a = (1.0 - p) * (1.0 - r);
    let gap = p + r * (1.0 - p);
    if users <= 64 || gap < 1e-2 {
        let mut acc = 0.0;
        for l in (0..users).rev() {
            acc = acc * a + (l + 1) as f64;
        }
        p * acc
    } else {
        let al = powu_f64(a, users);
        let l = users as f64;
        p * ((1.0 - (l + 1.0) * al + l * al * a) / (gap * gap))
    }
}

/// `g_n(r)` together with `dg_n/dr`, evaluated the same way as [`marginal_gain`].
fn gain_and_slope(p: f64, r: f64, users: usize) -> (f64, f64) {
    let a = (1.0 - p) * (1.0 - r);
    let gap = p + r * (1.0 - p);
    let (value, dvalue) = if users <= 64 || gap < 1e-2 {
        let (mut acc, mut dacc) = (0.0, 0.0);
        for l in (0..users).rev() {
            dacc = dacc * a + acc;
            acc = acc * a + (l + 1) as f64;
        }
        (acc, dacc)
    } else {
        let below = powu_f64(a, users - 1);
        let al = powu_f64(a, users);
        let l = users as f64;
        let s = (1.0 - (l + 1.0) * al + l * al * a) / (gap * gap);
        (s, (2.0 * s - l * (l + 1.0) * below) / gap)
    };
    (p * value, -p * (1.0 - p) * dvalue)
}

/// Root of `g(r) = λ` on `[0, 1]`. `g` is convex and decreasing, so Newton
/// steps from the left approach the root monotonically; bisection guards the
/// bracket against rounding.
fn coordinate_at(p: f64, users: usize, lambda: f64) -> f64 {
    if lambda <= p {
        return 1.0;
    }
    if lambda >= marginal_gain(p, 0.0, users) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut r = 0.0f64;
    for _ in 0..200 {
        let (g, slope) = gain_and_slope(p, r, users);
        if g > lambda {
            lo = r;
        } else if g < lambda {
            hi = r;
        } else {
            return r;
        }
        let mut next = r - (g - lambda) / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
            if next <= lo || next >= hi {
                return r;
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
    r
}

/// Stationarity certificate of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub lambda: f64,
    /// Largest violation of the complementary conditions over all files.
    pub max_residual: f64,
    /// `|Σ r_n - R_c|`.
    pub sum_residual: f64,
    pub interior: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub allocation: FractionalAllocation,
    pub rate: f64,
    pub certificate: KktCertificate,
}

const BOUNDARY: f64 = 1e-15;

/// Checks `r_n = 1 ⇔ p_n ≥ λ`, `r_n = 0 ⇔ g_n(0) ≤ λ`, `g_n(r_n) = λ`
/// otherwise. Files with `p_n = 0` carry no gradient and are skipped.
pub fn kkt_certificate(probs: &[f64], levels: &[f64], users: usize, cache: f64) -> KktCertificate {
    let active: Vec<usize> = (0..probs.len()).filter(|&n| probs[n] > 0.0).collect();
    let interior: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&n| levels[n] > BOUNDARY && levels[n] < 1.0 - BOUNDARY)
        .collect();
    let lambda = if interior.is_empty() {
        let lo = active
            .iter()
            .filter(|&&n| levels[n] <= BOUNDARY)
            .map(|&n| marginal_gain(probs[n], 0.0, users))
            .fold(0.0f64, f64::max);
        let hi = active
            .iter()
            .filter(|&&n| levels[n] >= 1.0 - BOUNDARY)
            .map(|&n| probs[n])
            .fold(f64::INFINITY, f64::min);
        if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            lo
        }
    } else {
        neumaier_sum(interior.iter().map(|&n| marginal_gain(probs[n], levels[n], users)))
            / interior.len() as f64
    };
    let mut max_residual = 0.0f64;
    for &n in &active {
        let (p, r) = (probs[n], levels[n]);
        let residual = if r >= 1.0 - BOUNDARY {
            (lambda - p).max(0.0)
        } else if r <= BOUNDARY {
            (marginal_gain(p, 0.0, users) - lambda).max(0.0)
        } else {
            (marginal_gain(p, r, users) - lambda).abs()
        };
        max_residual = max_residual.max(residual);
    }
    KktCertificate {
        lambda,
        max_residual,
        sum_residual: (neumaier_sum(levels.iter().copied()) - cache).abs(),
        interior: interior.len(),
    }
}

/// Fills files in index order: ones first, then the fractional remainder.
fn fill_in_order(r: &mut [f64], files: &[usize], mut budget: f64) -> f64 {
    for &n in files {
        if budget <= 0.0 {
            break;
        }
        let take = budget.min(1.0 - r[n]);
        r[n] += take;
        budget -= take;
    }
    budget
}

/// Minimizes the ergodic decentralized rate subject to `0 ≤ r_n ≤ 1` and
/// `Σ r_n = R_c`.
///
/// Bisection on the multiplier `λ`: each coordinate solves `g_n(r_n) = λ`
/// clipped to the box, and `Σ r_n(λ)` is non-increasing in `λ`.
pub fn kkt_optimize(profile: &PopularityProfile, users: usize, cache: f64) -> Result<KktSolution> {
    if users == 0 {
        return Err(Error::invalid("at least one user is required"));
    }
    let n_files = profile.n_files();
    check_cache(n_files, cache)?;
    let probs = profile.probs();
    let positive: Vec<usize> = (0..n_files).filter(|&n| probs[n] > 0.0).collect();
    let zero: Vec<usize> = (0..n_files).filter(|&n| probs[n] <= 0.0).collect();
    let mut r = vec![0.0f64; n_files];

    if cache >= positive.len() as f64 {
        for &n in &positive {
            r[n] = 1.0;
        }
        fill_in_order(&mut r, &zero, cache - positive.len() as f64);
    } else if users == 1 || probs[0] >= 1.0 {
        // Linear objective `Σ p_n (1 - r_n)`: most popular files first.
        fill_in_order(&mut r, &positive, cache);
    } else if cache > 0.0 {
        solve_multiplier(probs, &positive, users, cache, &mut r);
    }

    let allocation = FractionalAllocation::new(r, users)?;
    let rate = ergodic_rate(profile, &allocation)?;
    let certificate = kkt_certificate(probs, allocation.levels(), users, cache);
    Ok(KktSolution {
        allocation,
        rate,
        certificate,
    })
}

fn solve_multiplier(probs: &[f64], active: &[usize], users: usize, cache: f64, r: &mut [f64]) {
    let total_at = |lambda: f64| -> f64 {
        neumaier_sum(active.iter().map(|&n| coordinate_at(probs[n], users, lambda)))
    };
    let mut lo = 0.0f64;
    let mut hi = active
        .iter()
        .map(|&n| marginal_gain(probs[n], 0.0, users))
        .fold(0.0f64, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total_at(mid) > cache {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    for &n in active {
        r[n] = coordinate_at(probs[n], users, lambda);
    }

    // Spread the leftover budget over interior coordinates in proportion to
    // their local sensitivity 1/|g'|, which keeps the g values aligned.
    for _ in 0..4 {
        let residual = cache - neumaier_sum(active.iter().map(|&n| r[n]));
        if residual.abs() <= 1e-14 * cache.max(1.0) {
            break;
        }
        let weights: Vec<(usize, f64)> = active
            .iter()
            .copied()
            .filter(|&n| r[n] > 0.0 && r[n] < 1.0)
            .map(|n| {
                let (_, slope) = gain_and_slope(probs[n], r[n], users);
                (n, 1.0 / slope.abs().max(1e-300))
            })
            .collect();
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if weights.is_empty() || !total.is_finite() || total <= 0.0 {
            break;
        }
        for (n, w) in weights {
            r[n] = (r[n] + residual * w / total).clamp(0.0, 1.0);
        }
    }
}

/// `f_j(r) = r^{j-1} (1-r)^{L-j+1}` as a natural logarithm.
fn ln_weight(r: f64, j: usize, users: usize) -> f64 {
    let head = if j > 1 { (j - 1) as f64 * r.ln() } else { 0.0 };
    head + (users - j + 1) as f64 * (-r).ln_1p()
}

/// Per-request static rate `Σ_j Σ_{|S|=j} max_{ℓ∈S} f_j(r_{y_ℓ})`.
pub fn static_rate_for_request(alloc: &FractionalAllocation, request: &RequestVector) -> Result<f64> {
    request.check_against(alloc.n_files(), alloc.users())?;
    let values: Vec<f64> = request.files().iter().map(|&f| alloc.r[f]).collect();
    Ok(static_rate_by_values(&values, alloc.users()))
}

/// Grouped evaluation: for each `j`, sort the users' `f_j` values ascending;
/// the `i`-th smallest is the maximum of exactly `C(i-1, j-1)` subsets of size `j`.
fn static_rate_by_values(values: &[f64], users: usize) -> f64 {
    let mut ln_fact = vec![0.0f64; users + 1];
    for k in 1..=users {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let mut terms = Vec::new();
    let mut weights: Vec<f64> = Vec::with_capacity(users);
    for j in 1..=users {
        weights.clear();
        weights.extend(values.iter().map(|&r| ln_weight(r, j, users)));
        weights.sort_by(|a, b| a.total_cmp(b));
        for (idx, &w) in weights.iter().enumerate().skip(j - 1) {
            if w == f64::NEG_INFINITY {
                continue;
            }
            let ln_choose = ln_fact[idx] - ln_fact[j - 1] - ln_fact[idx + 1 - j];
            terms.push((ln_choose + w).exp());
        }
    }
    neumaier_sum(terms)
}

/// Grouped static rate from the requested files' caching probabilities, in
/// any scalar.
pub fn static_rate_by_values_in<T: Real>(values: &[T], users: usize) -> T {
    let mut total = T::zero();
    for j in 1..=users {
        let mut weights: Vec<T> = values
            .iter()
            .map(|r| r.powu(j - 1) * (T::one() - r.clone()).powu(users - j + 1))
            .collect();
        weights.sort_by(|a, b| a.partial_cmp(b).expect("comparable weights"));
        for (idx, w) in weights.into_iter().enumerate().skip(j - 1) {
            total = total + w * binomial::<T>(idx, j - 1);
        }
    }
    total
}

/// Worst-case static rate over request vectors; see
/// [`centralized::static_worst_case_rate`](crate::centralized::static_worst_case_rate)
/// for the search strategy.
pub fn static_worst_case_rate(
    profile: &PopularityProfile,
    alloc: &FractionalAllocation,
    budget: u64,
) -> Result<WorstCase> {
    alloc.check_profile(profile)?;
    let users = alloc.users();
    let levels: Vec<u64> = alloc.levels().iter().map(|r| r.to_bits()).collect();
    Ok(worst_case_search(&levels, users, budget, 0x5eed, |y| {
        let values: Vec<f64> = y.iter().map(|&f| alloc.r[f]).collect();
        static_rate_by_values(&values, users)
    }))
}

/// Average static rate over i.i.d. requests, by enumeration or sampling with
/// the same budget rules as the worst case.
pub fn static_average_rate(
    profile: &PopularityProfile,
    alloc: &FractionalAllocation,
    budget: u64,
) -> Result<Estimate> {
    alloc.check_profile(profile)?;
    let users = alloc.users();
    let levels: Vec<u64> = alloc.levels().iter().map(|r| r.to_bits()).collect();
    Ok(expectation_over_requests(
        &levels,
        profile.probs(),
        users,
        budget,
        0x5eed,
        |y| {
            let values: Vec<f64> = y.iter().map(|&f| alloc.r[f]).collect();
            static_rate_by_values(&values, users)
        },
    ))
}

/// Worst-case rate of the symmetric scheme `r_n = R_c / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MnRate {
    pub rate: f64,
    /// Set at `R_c = 0`, where the value is the continuity limit `L`.
    pub limit: bool,
}

/// `((N - R_c)/R_c)(1 - (1 - R_c/N)^L)`.
pub fn mn_worst_case(n_files: usize, users: usize, cache: f64) -> MnRate {
    if cache <= 0.0 {
        return MnRate {
            rate: users as f64,
            limit: true,
        };
    }
    let n = n_files as f64;
    let x = (cache / n).min(1.0);
    MnRate {
        rate: (n - cache).max(0.0) / cache * (1.0 - pow_complement(x, users)),
        limit: false,
    }
}
