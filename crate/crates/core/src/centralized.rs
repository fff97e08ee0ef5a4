//! Centralized coded caching: integer replication levels per file.
//!
//! File `n` is split into `C(L, r_n)` subfiles, one per `r_n`-subset of users,
//! and every user in the subset caches that subfile. The ergodic evaluator
//! averages over i.i.d. requests; the static evaluators work per request
//! vector and project to the average or the worst case.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, neumaier_sum, pow_complement, Real};
use crate::popularity::{coverage, PopularityProfile};
use crate::request::{worst_case_search, RequestVector, WorstCase};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerAllocation {
    r: Vec<usize>,
    users: usize,
}

impl IntegerAllocation {
    pub fn new(r: Vec<usize>, users: usize) -> Result<Self> {
        if users == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        if r.is_empty() {
            return Err(Error::invalid("allocation needs at least one file"));
        }
        if let Some((i, &v)) = r.iter().enumerate().find(|(_, &v)| v > users) {
            return Err(Error::InvalidInput {
                index: Some(i),
                reason: format!("replication level {v} exceeds the user count {users}"),
            });
        }
        Ok(Self { r, users })
    }

    pub fn zeros(n_files: usize, users: usize) -> Result<Self> {
        Self::new(vec![0; n_files], users)
    }

    /// Replication levels in sorted-popularity order.
    pub fn levels(&self) -> &[usize] {
        &self.r
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn n_files(&self) -> usize {
        self.r.len()
    }

    /// Normalized per-user cache size `Σ r_n / L`.
    pub fn cache(&self) -> f64 {
        self.r.iter().sum::<usize>() as f64 / self.users as f64
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

    /// JSON record in the caller's original file numbering.
    pub fn to_record(&self, profile: &PopularityProfile) -> AllocationRecord<usize> {
        AllocationRecord {
            users: self.users,
            r: profile.to_original_order(&self.r),
        }
    }

    pub fn from_record(record: &AllocationRecord<usize>, profile: &PopularityProfile) -> Result<Self> {
        if record.r.len() != profile.n_files() {
            return Err(Error::DimensionMismatch {
                expected: profile.n_files(),
                actual: record.r.len(),
            });
        }
        Self::new(profile.from_original_order(&record.r), record.users)
    }
}

/// Serialized allocation: `{"users": L, "r": [...]}`, entries in the caller's
/// original file numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord<T> {
    pub users: usize,
    pub r: Vec<T>,
}

/// Expected per-file delivery load `κ(r, p) = E[Z / (Z + r)]`, `Z ~ Binom(L - r, p)`.
///
/// `r = L + 1` is accepted and yields 0, which lets marginal gains at a
/// saturated file be written uniformly.
pub fn kappa(r: usize, p: f64, users: usize) -> Result<f64> {
    if r > users + 1 {
        return Err(Error::invalid(format!(
            "replication level {r} exceeds L + 1 = {}",
            users + 1
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(kappa_unchecked(r, p, users))
}

fn kappa_unchecked(r: usize, p: f64, users: usize) -> f64 {
    if r >= users || p <= 0.0 {
        return 0.0;
    }
    if r == 0 {
        return coverage(p, users);
    }
    let m = users - r;
    if p >= 1.0 {
        return m as f64 / users as f64;
    }
    // Binomial pmf in log space: ln C(m, j) accumulated multiplicatively.
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut ln_choose = 0.0f64;
    let mut terms = Vec::with_capacity(m);
    for j in 1..=m {
        ln_choose += ((m - j + 1) as f64).ln() - (j as f64).ln();
        let pmf = (ln_choose + j as f64 * ln_p + (m - j) as f64 * ln_q).exp();
        terms.push(j as f64 / (j + r) as f64 * pmf);
    }
    neumaier_sum(terms)
}

/// [`kappa`] by the direct binomial sum in any scalar; exact for rationals.
pub fn kappa_in<T: Real>(r: usize, p: &T, users: usize) -> T {
    if r >= users {
        return T::zero();
    }
    let m = users - r;
    let q = T::one() - p.clone();
    let mut total = T::zero();
    for j in 1..=m {
        let weight = T::from_count(j) / T::from_count(j + r);
        total = total + weight * binomial::<T>(m, j) * p.powu(j) * q.powu(m - j);
    }
    total
}

/// Ergodic centralized rate `Σ_n κ(r_n, p_n)`.
pub fn ergodic_rate(profile: &PopularityProfile, alloc: &IntegerAllocation) -> Result<f64> {
    alloc.check_profile(profile)?;
    let users = alloc.users();
    Ok(neumaier_sum(
        profile
            .probs()
            .iter()
            .zip(alloc.levels())
            .map(|(&p, &r)| kappa_unchecked(r, p, users)),
    ))
}

/// [`ergodic_rate`] over arbitrary scalars.
pub fn ergodic_rate_in<T: Real>(probs: &[T], levels: &[usize], users: usize) -> T {
    probs
        .iter()
        .zip(levels)
        .fold(T::zero(), |acc, (p, &r)| acc + kappa_in(r, p, users))
}

/// Output of the greedy optimizer at one cache size.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub allocation: IntegerAllocation,
    pub rate: f64,
}

/// Incremental state of the greedy allocation. `current[n] = κ(r_n)` and
/// `next[n] = κ(r_n + 1)`, so the marginal gain of file `n` is their difference.
struct GreedyState<T> {
    r: Vec<usize>,
    current: Vec<T>,
    next: Vec<T>,
}

impl<T: Real> GreedyState<T> {
    fn new(n_files: usize, mut kappa: impl FnMut(usize, usize) -> T) -> Self {
        Self {
            r: vec![0; n_files],
            current: (0..n_files).map(|n| kappa(n, 0)).collect(),
            next: (0..n_files).map(|n| kappa(n, 1)).collect(),
        }
    }

    /// Adds one replica to the file with the largest marginal gain, ties to
    /// the smallest index. Returns the chosen file.
    fn step(&mut self, users: usize, mut kappa: impl FnMut(usize, usize) -> T) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for n in 0..self.r.len() {
            if self.r[n] >= users {
                continue;
            }
            let gain = self.current[n].clone() - self.next[n].clone();
            if best.as_ref().map_or(true, |(_, g)| gain > *g) {
                best = Some((n, gain));
            }
        }
        let (m, _) = best?;
        self.r[m] += 1;
        self.current[m] = std::mem::replace(&mut self.next[m], T::zero());
        self.next[m] = kappa(m, self.r[m] + 1);
        Some(m)
    }
}

fn check_steps(n_files: usize, users: usize, cache: f64) -> Result<usize> {
    if users == 0 {
        return Err(Error::invalid("at least one user is required"));
    }
    let scaled = cache * users as f64;
    if !scaled.is_finite() {
        return Err(Error::invalid(format!("cache size {cache} is not finite")));
    }
    let steps = scaled.round();
    if (scaled - steps).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "L·R_c = {scaled} is not an integer; centralized points exist only on the grid k/L, \
             memory-share between the adjacent grid points instead"
        )));
    }
    if steps < 0.0 || steps > (n_files * users) as f64 {
        return Err(Error::invalid(format!(
            "cache size {cache} outside [0, {n_files}]"
        )));
    }
    Ok(steps as usize)
}

fn memoized_kappa(probs: &[f64], users: usize) -> impl FnMut(usize, usize) -> f64 + '_ {
    let mut memo: HashMap<(u64, usize), f64> = HashMap::new();
    move |n, r| {
        let p = probs[n];
        *memo
            .entry((p.to_bits(), r))
            .or_insert_with(|| kappa_unchecked(r, p, users))
    }
}

/// Minimizes the ergodic centralized rate over integer allocations with
/// `Σ r_n = L·R_c` by unit increments of largest marginal gain.
///
/// The per-file load is convex in `r`, which makes the greedy choice optimal.
pub fn greedy_optimize(
    profile: &PopularityProfile,
    users: usize,
    cache: f64,
) -> Result<GreedyResult> {
    let steps = check_steps(profile.n_files(), users, cache)?;
    let mut kappa = memoized_kappa(profile.probs(), users);
    let mut state = GreedyState::new(profile.n_files(), &mut kappa);
    for _ in 0..steps {
        state.step(users, &mut kappa);
    }
    let allocation = IntegerAllocation::new(state.r, users)?;
    let rate = neumaier_sum(state.current.iter().copied());
    Ok(GreedyResult { allocation, rate })
}

/// Greedy optimization over arbitrary scalars; returns the levels and the rate.
pub fn greedy_optimize_in<T: Real>(probs: &[T], users: usize, steps: usize) -> (Vec<usize>, T) {
    assert!(steps <= probs.len() * users, "more steps than replicas");
    let mut kappa = |n: usize, r: usize| kappa_in(r, &probs[n], users);
    let mut state = GreedyState::new(probs.len(), &mut kappa);
    for _ in 0..steps {
        state.step(users, &mut kappa);
    }
    let rate = state.current.iter().cloned().fold(T::zero(), |a, b| a + b);
    (state.r, rate)
}

/// The whole greedy trajectory for `R_c = 0, 1/L, …, N` in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    pub users: usize,
    pub n_files: usize,
    /// File incremented at each step.
    pub increments: Vec<usize>,
    /// `rates[s]` is the optimal rate at `R_c = s / L`.
    pub rates: Vec<f64>,
}

impl GreedyPath {
    pub fn cache_at(&self, step: usize) -> f64 {
        step as f64 / self.users as f64
    }

    /// Allocation after `step` increments.
    pub fn allocation_at(&self, step: usize) -> IntegerAllocation {
        let mut r = vec![0; self.n_files];
        for &m in &self.increments[..step] {
            r[m] += 1;
        }
        IntegerAllocation { r, users: self.users }
    }
}

pub fn greedy_path(profile: &PopularityProfile, users: usize) -> Result<GreedyPath> {
    let n_files = profile.n_files();
    check_steps(n_files, users, 0.0)?;
    let mut kappa = memoized_kappa(profile.probs(), users);
    let mut state = GreedyState::new(n_files, &mut kappa);
    let total = n_files * users;
    let mut increments = Vec::with_capacity(total);
    let mut rates = Vec::with_capacity(total + 1);
    rates.push(neumaier_sum(state.current.iter().copied()));
    for _ in 0..total {
        let m = state
            .step(users, &mut kappa)
            .expect("steps never exceed N·L");
        increments.push(m);
        rates.push(neumaier_sum(state.current.iter().copied()));
    }
    Ok(GreedyPath {
        users,
        n_files,
        increments,
        rates,
    })
}

/// Static (single-block) delivery rate for one request vector:
/// `Σ_{j=0}^{L-1} [C(L, j+1) - C(L - c_j, j+1)] / C(L, j)` with
/// `c_j = #{ℓ : r_{y_ℓ} = j}`.
pub fn static_rate_for_request(alloc: &IntegerAllocation, request: &RequestVector) -> Result<f64> {
    request.check_against(alloc.n_files(), alloc.users())?;
    Ok(static_rate_by_levels(&requested_levels(alloc, request), alloc.users()))
}

fn requested_levels(alloc: &IntegerAllocation, request: &RequestVector) -> Vec<usize> {
    request.files().iter().map(|&f| alloc.r[f]).collect()
}

fn level_counts(levels: &[usize], users: usize) -> Vec<usize> {
    let mut counts = vec![0usize; users + 1];
    for &r in levels {
        counts[r] += 1;
    }
    counts
}

/// Float evaluation of the grouped form, written as
/// `(L-j)/(j+1) · (1 - Π_{i=0}^{j} (L - c_j - i)/(L - i))` to avoid huge binomials.
fn static_rate_by_levels(levels: &[usize], users: usize) -> f64 {
    let counts = level_counts(levels, users);
    let mut terms = Vec::new();
    for (j, &c) in counts.iter().enumerate().take(users) {
        if c == 0 {
            continue;
        }
        let mut untouched = 1.0;
        if users - c < j + 1 {
            untouched = 0.0;
        } else {
            for i in 0..=j {
                untouched *= (users - c - i) as f64 / (users - i) as f64;
            }
        }
        terms.push((users - j) as f64 / (j + 1) as f64 * (1.0 - untouched));
    }
    neumaier_sum(terms)
}

/// Grouped static rate from the replication levels of the requested files,
/// in any scalar.
pub fn static_rate_by_levels_in<T: Real>(levels: &[usize], users: usize) -> T {
    let counts = level_counts(levels, users);
    let mut total = T::zero();
    for (j, &c) in counts.iter().enumerate().take(users) {
        let active = binomial::<T>(users, j + 1) - binomial::<T>(users - c, j + 1);
        total = total + active / binomial::<T>(users, j);
    }
    total
}

/// Average static rate `Σ_j (L-j)/(j+1) (1 - (1 - α_j)^{j+1})`, where
/// `α_j` is the total popularity of files replicated `j` times.
pub fn static_average_rate(profile: &PopularityProfile, alloc: &IntegerAllocation) -> Result<f64> {
    alloc.check_profile(profile)?;
    let users = alloc.users();
    let mut alpha = vec![0.0f64; users + 1];
    for (&p, &r) in profile.probs().iter().zip(alloc.levels()) {
        alpha[r] += p;
    }
    Ok(neumaier_sum((0..users).map(|j| {
        (users - j) as f64 / (j + 1) as f64 * (1.0 - pow_complement(alpha[j].min(1.0), j + 1))
    })))
}

pub fn static_average_rate_in<T: Real>(probs: &[T], levels: &[usize], users: usize) -> T {
    let mut alpha = vec![T::zero(); users + 1];
    for (p, &r) in probs.iter().zip(levels) {
        alpha[r] = alpha[r].clone() + p.clone();
    }
    let mut total = T::zero();
    for (j, a) in alpha.iter().enumerate().take(users) {
        let miss = (T::one() - a.clone()).powu(j + 1);
        total = total
            + T::from_count(users - j) / T::from_count(j + 1) * (T::one() - miss);
    }
    total
}

/// Worst-case (compound) static rate over request vectors.
///
/// Exact whenever full enumeration or level-multiset enumeration fits in
/// `budget` evaluations; otherwise approximate and flagged as such.
pub fn static_worst_case_rate(
    profile: &PopularityProfile,
    alloc: &IntegerAllocation,
    budget: u64,
) -> Result<WorstCase> {
    alloc.check_profile(profile)?;
    let users = alloc.users();
    let levels: Vec<u64> = alloc.levels().iter().map(|&r| r as u64).collect();
    Ok(worst_case_search(&levels, users, budget, 0x5eed, |y| {
        let lv: Vec<usize> = y.iter().map(|&f| alloc.r[f]).collect();
        static_rate_by_levels(&lv, users)
    }))
}
