use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{subset_users, DEFAULT_SEED, MAX_SIM_USERS};
use crate::centralized::IntegerAllocation;
use crate::decentralized::FractionalAllocation;
use crate::error::{Error, Result};
use crate::numeric::{binomial, Real};
use crate::popularity::PopularityProfile;
use crate::request::{for_each_request, request_count, Estimate};

#[derive(Debug, Clone, Copy)]
pub enum OracleScheme<'a> {
    Centralized(&'a IntegerAllocation),
    Decentralized(&'a FractionalAllocation),
}

/// Allocation view for the generic oracle.
#[derive(Debug, Clone, Copy)]
pub enum OracleLevels<'a, T> {
    Integer(&'a [usize]),
    Fractional(&'a [T]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Largest `N^L` enumerated exactly.
    pub budget: u64,
    /// Fall back to sampling requests when `N^L` exceeds the budget.
    pub monte_carlo: bool,
    pub samples: u64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            budget: 1_000_000,
            monte_carlo: false,
            samples: 20_000,
            seed: DEFAULT_SEED,
        }
    }
}

/// Expected size (per file bit) of user `user`'s share of message `U_S`,
/// averaged over the placement for a fixed request vector `y`.
fn share<T: Real>(levels: &OracleLevels<'_, T>, users: usize, subset: u64, user: usize, y: &[usize], n_files: usize) -> T {
    let mut total = T::zero();
    match levels {
        OracleLevels::Integer(r) => {
            let rest = subset & !(1u64 << user);
            for n in 0..n_files {
                let rn = r[n];
                if rn > rest.count_ones() as usize {
                    continue;
                }
                let weight = T::one() / binomial::<T>(users, rn);
                // Subfile labels T ⊆ S \ {ℓ} of size r_n.
                let mut label = rest;
                loop {
                    if label.count_ones() as usize == rn {
                        let senders = subset & !label;
                        let active = subset_users(senders).all(|j| y[j] == n)
                            && (0..users).filter(|j| subset >> j & 1 == 0).all(|j| y[j] != n);
                        if active {
                            total = total + weight.clone();
                        }
                    }
                    if label == 0 {
                        break;
                    }
                    label = (label - 1) & rest;
                }
            }
        }
        OracleLevels::Fractional(r) => {
            for n in 0..n_files {
                let rn = &r[n];
                let miss = T::one() - rn.clone();
                let mut term = T::one();
                for j in 0..users {
                    let wants = y[j] == n;
                    let factor = if j == user {
                        if wants { miss.clone() } else { T::zero() }
                    } else if subset >> j & 1 == 1 {
                        if wants { T::one() } else { rn.clone() }
                    } else if wants {
                        T::zero()
                    } else {
                        miss.clone()
                    };
                    term = term * factor;
                    if term == T::zero() {
                        break;
                    }
                }
                total = total + term;
            }
        }
    }
    total
}

fn check_levels<T>(levels: &OracleLevels<'_, T>, n_files: usize, users: usize) -> Result<()> {
    let len = match levels {
        OracleLevels::Integer(r) => r.len(),
        OracleLevels::Fractional(r) => r.len(),
    };
    if len != n_files {
        return Err(Error::DimensionMismatch {
            expected: n_files,
            actual: len,
        });
    }
    if users == 0 || users > MAX_SIM_USERS {
        return Err(Error::invalid(format!(
            "the oracle supports between 1 and {MAX_SIM_USERS} users"
        )));
    }
    Ok(())
}

/// `Σ_S max_{ℓ∈S} E_Y[share(S, ℓ, Y)]` by full enumeration of request
/// vectors weighted by `Π p_{y_ℓ}`, in any scalar.
pub fn ergodic_rate_oracle_in<T: Real>(probs: &[T], levels: OracleLevels<'_, T>, users: usize) -> Result<T> {
    let n_files = probs.len();
    check_levels(&levels, n_files, users)?;
    let subsets = 1usize << users;
    let mut expected = vec![T::zero(); subsets * users];
    for_each_request(n_files, users, |y| {
        let weight = y
            .iter()
            .fold(T::one(), |acc, &f| acc * probs[f].clone());
        if weight == T::zero() {
            return;
        }
        for subset in 1..subsets as u64 {
            for user in subset_users(subset) {
                let h = share(&levels, users, subset, user, y, n_files);
                let slot = &mut expected[subset as usize * users + user];
                *slot = slot.clone() + weight.clone() * h;
            }
        }
    });
    let mut total = T::zero();
    for subset in 1..subsets as u64 {
        let best = subset_users(subset)
            .map(|u| expected[subset as usize * users + u].clone())
            .fold(None, |acc: Option<T>, v| match acc {
                Some(a) if a >= v => Some(a),
                _ => Some(v),
            })
            .expect("nonempty subset");
        total = total + best;
    }
    Ok(total)
}

/// Ergodic rate of a scheme from first principles: exact when `N^L` fits the
/// budget, otherwise a seeded Monte Carlo estimate over requests (if
/// enabled) with the placement still averaged analytically.
pub fn ergodic_rate_oracle(
    profile: &PopularityProfile,
    scheme: OracleScheme<'_>,
    options: OracleOptions,
) -> Result<Estimate> {
    let (levels, users): (OracleLevels<'_, f64>, usize) = match scheme {
        OracleScheme::Centralized(a) => (OracleLevels::Integer(a.levels()), a.users()),
        OracleScheme::Decentralized(a) => (OracleLevels::Fractional(a.levels()), a.users()),
    };
    let probs = profile.probs();
    let n_files = probs.len();
    check_levels(&levels, n_files, users)?;
    let required = request_count(n_files, users);
    if required <= options.budget as f64 {
        let value = ergodic_rate_oracle_in(probs, levels, users)?;
        return Ok(Estimate {
            value,
            std_error: 0.0,
            exact: true,
            evaluated: required as u64,
        });
    }
    if !options.monte_carlo {
        return Err(Error::BudgetExceeded {
            required,
            budget: options.budget,
        });
    }
    let samples = options.samples.max(2);
    let subsets = 1usize << users;
    let dist = WeightedIndex::new(probs).map_err(|e| Error::invalid(e.to_string()))?;
    let draw = |rng: &mut ChaCha8Rng, y: &mut Vec<usize>| {
        for slot in y.iter_mut() {
            *slot = dist.sample(rng);
        }
    };

    // First pass: per-(S, ℓ) means, to fix the maximizing user of each S.
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut y = vec![0usize; users];
    let mut sums = vec![0.0f64; subsets * users];
    for _ in 0..samples {
        draw(&mut rng, &mut y);
        for subset in 1..subsets as u64 {
            for user in subset_users(subset) {
                sums[subset as usize * users + user] += share(&levels, users, subset, user, &y, n_files);
            }
        }
    }
    let argmax: Vec<usize> = (0..subsets as u64)
        .map(|subset| {
            subset_users(subset)
                .max_by(|&a, &b| {
                    sums[subset as usize * users + a]
                        .total_cmp(&sums[subset as usize * users + b])
                        .then(b.cmp(&a))
                })
                .unwrap_or(0)
        })
        .collect();

    // Second pass over the same draws: per-sample totals for the error bar.
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 1..=samples {
        draw(&mut rng, &mut y);
        let v: f64 = (1..subsets as u64)
            .map(|s| share(&levels, users, s, argmax[s as usize], &y, n_files))
            .sum();
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    Ok(Estimate {
        value: mean,
        std_error: (m2 / (samples - 1) as f64 / samples as f64).sqrt(),
        exact: false,
        evaluated: samples,
    })
}
