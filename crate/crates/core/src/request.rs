//! Request vectors and the worst-case search shared by both static schemes.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::{binomial_f64, neumaier_sum};
use crate::popularity::PopularityProfile;

/// One requested file per user, as sorted-popularity indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestVector(Vec<usize>);

impl RequestVector {
    pub fn new(files: Vec<usize>, n_files: usize) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::invalid("request vector needs at least one user"));
        }
        if let Some(&bad) = files.iter().find(|&&f| f >= n_files) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: n_files,
            });
        }
        Ok(Self(files))
    }

    /// Builds a request from the caller's 1-based original file numbering.
    pub fn from_original_numbering(profile: &PopularityProfile, files: &[usize]) -> Result<Self> {
        let n = profile.n_files();
        let mut sorted = Vec::with_capacity(files.len());
        for &f in files {
            if f == 0 || f > n {
                return Err(Error::InvalidArgument(format!(
                    "requested file {f} outside 1..={n}"
                )));
            }
            sorted.push(profile.sorted_index(f - 1)?);
        }
        Self::new(sorted, n)
    }

    /// The caller's 1-based original numbering of this request.
    pub fn to_original_numbering(&self, profile: &PopularityProfile) -> Vec<usize> {
        self.0.iter().map(|&f| profile.permutation()[f] + 1).collect()
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }

    pub fn files(&self) -> &[usize] {
        &self.0
    }

    /// Probability under i.i.d. requests.
    pub fn probability(&self, probs: &[f64]) -> f64 {
        self.0.iter().map(|&f| probs[f]).product()
    }

    pub(crate) fn check_against(&self, n_files: usize, users: usize) -> Result<()> {
        if self.users() != users {
            return Err(Error::DimensionMismatch {
                expected: users,
                actual: self.users(),
            });
        }
        if let Some(&bad) = self.0.iter().find(|&&f| f >= n_files) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: n_files,
            });
        }
        Ok(())
    }
}

/// `N^L` as a float (it overflows integers quickly).
pub fn request_count(n_files: usize, users: usize) -> f64 {
    (n_files as f64).powi(users as i32)
}

/// Visits every request vector in `[0, n_files)^users` in lexicographic order.
pub fn for_each_request(n_files: usize, users: usize, mut f: impl FnMut(&[usize])) {
    if n_files == 0 {
        return;
    }
    let mut y = vec![0usize; users];
    loop {
        f(&y);
        let mut pos = users;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            y[pos] += 1;
            if y[pos] < n_files {
                break;
            }
            y[pos] = 0;
        }
    }
}

/// Visits every non-decreasing sequence of length `users` over `[0, items)`
/// (a multiset of size `users`).
fn for_each_multiset(items: usize, users: usize, mut f: impl FnMut(&[usize])) {
    if items == 0 {
        return;
    }
    let mut y = vec![0usize; users];
    loop {
        f(&y);
        let mut pos = users;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if y[pos] + 1 < items {
                let v = y[pos] + 1;
                for slot in &mut y[pos..] {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Result of a worst-case (compound) rate search.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub rate: f64,
    pub request: RequestVector,
    /// False when the search fell back to heuristics and sampling.
    pub exact: bool,
    pub evaluated: u64,
}

/// Default cap on request evaluations for the worst-case search.
pub const DEFAULT_WORST_CASE_BUDGET: u64 = 1_000_000;

const MAX_SAMPLES: u64 = 100_000;

/// Maximizes a per-request rate that is symmetric in the users and depends on
/// each requested file only through `level[file]`.
///
/// Order of preference: full enumeration when `N^L ≤ budget`; enumeration of
/// level multisets when that fits the budget (still exact, by symmetry);
/// otherwise structured candidates plus seeded random sampling.
pub(crate) fn worst_case_search(
    levels: &[u64],
    users: usize,
    budget: u64,
    seed: u64,
    eval: impl Fn(&[usize]) -> f64,
) -> WorstCase {
    let n_files = levels.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    let mut consider = |y: &[usize], best: &mut Option<(f64, Vec<usize>)>| {
        let v = eval(y);
        evaluated += 1;
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            *best = Some((v, y.to_vec()));
        }
    };

    let finish = |best: Option<(f64, Vec<usize>)>, exact: bool, evaluated: u64| {
        let (rate, y) = best.expect("at least one request evaluated");
        WorstCase {
            rate,
            request: RequestVector(y),
            exact,
            evaluated,
        }
    };

    if request_count(n_files, users) <= budget as f64 {
        for_each_request(n_files, users, |y| consider(y, &mut best));
        return finish(best, true, evaluated);
    }

    // One representative (most popular) file per distinct level.
    let mut reps: Vec<usize> = Vec::new();
    for (f, &lvl) in levels.iter().enumerate() {
        if !reps.iter().any(|&r| levels[r] == lvl) {
            reps.push(f);
        }
    }
    let multisets = binomial_f64(users + reps.len() - 1, users);
    if multisets <= budget as f64 {
        let mut y = vec![0usize; users];
        for_each_multiset(reps.len(), users, |m| {
            for (slot, &i) in y.iter_mut().zip(m) {
                *slot = reps[i];
            }
            consider(&y, &mut best);
        });
        return finish(best, true, evaluated);
    }

    // Structured candidates: everyone on one level, then distinct files in
    // popularity order and in reverse popularity order.
    for &r in &reps {
        consider(&vec![r; users], &mut best);
    }
    let forward: Vec<usize> = (0..users).map(|l| l % n_files).collect();
    consider(&forward, &mut best);
    let backward: Vec<usize> = (0..users).map(|l| n_files - 1 - (l % n_files)).collect();
    consider(&backward, &mut best);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = budget.min(MAX_SAMPLES);
    let mut y = vec![0usize; users];
    for _ in 0..samples {
        for slot in y.iter_mut() {
            *slot = rng.gen_range(0..n_files);
        }
        consider(&y, &mut best);
    }
    finish(best, false, evaluated)
}

/// An expectation, exact or estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Standard error of a sampled estimate; 0 when exact.
    pub std_error: f64,
    pub exact: bool,
    pub evaluated: u64,
}

/// Expectation of a per-request rate under i.i.d. requests drawn from `probs`,
/// for a rate with the same symmetry as in [`worst_case_search`].
///
/// Exact through full enumeration or through level multisets weighted by
/// multinomial probabilities; otherwise a seeded Monte Carlo estimate.
pub(crate) fn expectation_over_requests(
    levels: &[u64],
    probs: &[f64],
    users: usize,
    budget: u64,
    seed: u64,
    eval: impl Fn(&[usize]) -> f64,
) -> Estimate {
    let n_files = levels.len();
    let mut evaluated = 0u64;
    if request_count(n_files, users) <= budget as f64 {
        let mut terms = Vec::new();
        for_each_request(n_files, users, |y| {
            let weight: f64 = y.iter().map(|&f| probs[f]).product();
            if weight > 0.0 {
                terms.push(weight * eval(y));
                evaluated += 1;
            }
        });
        return Estimate {
            value: neumaier_sum(terms),
            std_error: 0.0,
            exact: true,
            evaluated,
        };
    }

    let mut reps: Vec<usize> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for (f, &lvl) in levels.iter().enumerate() {
        match reps.iter().position(|&r| levels[r] == lvl) {
            Some(i) => mass[i] += probs[f],
            None => {
                reps.push(f);
                mass.push(probs[f]);
            }
        }
    }
    if binomial_f64(users + reps.len() - 1, users) <= budget as f64 {
        let mut ln_fact = vec![0.0f64; users + 1];
        for k in 1..=users {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let mut terms = Vec::new();
        let mut y = vec![0usize; users];
        for_each_multiset(reps.len(), users, |m| {
            let mut ln_w = ln_fact[users];
            let mut start = 0;
            while start < users {
                let end = start + m[start..].iter().take_while(|&&v| v == m[start]).count();
                let count = end - start;
                let pm = mass[m[start]];
                if pm <= 0.0 {
                    return;
                }
                ln_w += count as f64 * pm.ln() - ln_fact[count];
                start = end;
            }
            for (slot, &i) in y.iter_mut().zip(m) {
                *slot = reps[i];
            }
            terms.push(ln_w.exp() * eval(&y));
            evaluated += 1;
        });
        return Estimate {
            value: neumaier_sum(terms),
            std_error: 0.0,
            exact: true,
            evaluated,
        };
    }

    let dist = WeightedIndex::new(probs).expect("valid popularity profile");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = budget.clamp(2, MAX_SAMPLES);
    let mut y = vec![0usize; users];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 1..=samples {
        for slot in y.iter_mut() {
            *slot = dist.sample(&mut rng);
        }
        let v = eval(&y);
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let variance = m2 / (samples - 1) as f64;
    Estimate {
        value: mean,
        std_error: (variance / samples as f64).sqrt(),
        exact: false,
        evaluated: samples,
    }
}
