//! Reference computations written directly from the scheme definitions, with
//! no shared code paths beyond the scalar type.
#![allow(dead_code)]

use coded_caching::exact::{rational, Rational};
use num_traits::{One, Zero};

pub fn q(n: i64, d: i64) -> Rational {
    rational(n, d)
}

fn choose(n: usize, k: usize) -> Rational {
    if k > n {
        return Rational::zero();
    }
    let mut acc = Rational::one();
    for i in 0..k {
        acc = acc * q((n - i) as i64, (i + 1) as i64);
    }
    acc
}

fn pow(x: &Rational, e: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..e {
        acc = acc * x;
    }
    acc
}

fn members(mask: u64, users: usize) -> Vec<usize> {
    (0..users).filter(|&l| mask >> l & 1 == 1).collect()
}

/// Static centralized rate by walking all `2^L - 1` user subsets: subset `S`
/// carries a message of `1/C(L, |S|-1)` file units when some member's file is
/// replicated exactly `|S| - 1` times.
pub fn static_centralized_by_subsets(levels_of_requests: &[usize]) -> Rational {
    let users = levels_of_requests.len();
    let mut total = Rational::zero();
    for mask in 1u64..(1 << users) {
        let s = members(mask, users);
        let t = s.len() - 1;
        if s.iter().any(|&l| levels_of_requests[l] == t) {
            total += Rational::one() / choose(users, t);
        }
    }
    total
}

/// Static decentralized rate by walking all user subsets: member `ℓ` needs the
/// fraction `r^{|S|-1} (1-r)^{L-|S|+1}` of its file held by exactly `S \ {ℓ}`.
pub fn static_decentralized_by_subsets(values_of_requests: &[Rational]) -> Rational {
    let users = values_of_requests.len();
    // share[l][j] = r^{j-1} (1-r)^{L-j+1} for member l of a subset of size j.
    let share: Vec<Vec<Rational>> = values_of_requests
        .iter()
        .map(|r| {
            (0..=users)
                .map(|j| {
                    if j == 0 {
                        Rational::zero()
                    } else {
                        pow(r, j - 1) * pow(&(Rational::one() - r), users - j + 1)
                    }
                })
                .collect()
        })
        .collect();
    let mut total = Rational::zero();
    for mask in 1u64..(1 << users) {
        let s = members(mask, users);
        let j = s.len();
        let best = s
            .iter()
            .map(|&l| &share[l][j])
            .max()
            .expect("nonempty subset");
        total += best;
    }
    total
}

/// Calls `f` with every vector in `[0, n)^len`.
pub fn for_each_vector(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut v = vec![0usize; len];
    loop {
        f(&v);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            v[i] += 1;
            if v[i] < n {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

fn request_weight(probs: &[Rational], y: &[usize]) -> Rational {
    y.iter().fold(Rational::one(), |acc, &f| acc * &probs[f])
}

fn sum_of_maxima(table: &[Vec<Rational>], users: usize) -> Rational {
    let mut total = Rational::zero();
    for mask in 1u64..(1 << users) {
        let best = members(mask, users)
            .into_iter()
            .map(|l| table[mask as usize][l].clone())
            .max()
            .expect("nonempty subset");
        total += best;
    }
    total
}

/// Ergodic centralized rate with the placement enumerated explicitly: file `n`
/// goes to a uniformly random user set `T` of size `r_n`, and its symbols
/// travel in `U_S` when `T ⊆ S \ {ℓ}`, every user of `S \ T` wants `n`, and no
/// user outside `S` does. Expectations over `(Y, T)` are taken per `(S, ℓ)`
/// before the maximum over `ℓ`.
pub fn ergodic_centralized_enumerated(probs: &[Rational], levels: &[usize], users: usize) -> Rational {
    let subsets = 1usize << users;
    let labels: Vec<Vec<u64>> = (0..=users)
        .map(|r| (0u64..subsets as u64).filter(|m| m.count_ones() as usize == r).collect())
        .collect();
    let mut table = vec![vec![Rational::zero(); users]; subsets];
    for_each_vector(probs.len(), users, |y| {
        let w = request_weight(probs, y);
        if w.is_zero() {
            return;
        }
        for mask in 1u64..subsets as u64 {
            for l in members(mask, users) {
                let n = y[l];
                let choices = &labels[levels[n]];
                let hits = choices
                    .iter()
                    .filter(|&&t| {
                        t & mask == t
                            && t >> l & 1 == 0
                            && (0..users).all(|j| {
                                let in_s = mask >> j & 1 == 1;
                                let in_t = t >> j & 1 == 1;
                                if in_s && !in_t {
                                    y[j] == n
                                } else if !in_s {
                                    y[j] != n
                                } else {
                                    true
                                }
                            })
                    })
                    .count();
                if hits > 0 {
                    table[mask as usize][l] += &w * q(hits as i64, choices.len() as i64);
                }
            }
        }
    });
    sum_of_maxima(&table, users)
}

/// Ergodic decentralized rate with each file's caching pattern (which users
/// hold a symbol) enumerated explicitly. A symbol of file `n` travels in
/// `U_S` with `S` = requesters of `n` ∪ holders of the symbol, as long as some
/// requester lacks it.
pub fn ergodic_decentralized_enumerated(probs: &[Rational], levels: &[Rational], users: usize) -> Rational {
    let subsets = 1usize << users;
    let pattern_weight: Vec<Vec<Rational>> = levels
        .iter()
        .map(|r| {
            (0..subsets as u64)
                .map(|c| {
                    let k = c.count_ones() as usize;
                    pow(r, k) * pow(&(Rational::one() - r), users - k)
                })
                .collect()
        })
        .collect();
    let mut table = vec![vec![Rational::zero(); users]; subsets];
    for_each_vector(probs.len(), users, |y| {
        let w = request_weight(probs, y);
        if w.is_zero() {
            return;
        }
        for l in 0..users {
            let n = y[l];
            let wanting: u64 = (0..users).filter(|&j| y[j] == n).map(|j| 1u64 << j).sum();
            for c in 0..subsets as u64 {
                if c >> l & 1 == 1 {
                    continue;
                }
                let s = wanting | c;
                table[s as usize][l] += &w * &pattern_weight[n][c as usize];
            }
        }
    });
    sum_of_maxima(&table, users)
}

/// `E[Z/(Z+r)]` for `Z ~ Binom(L-r, p)`, summed term by term.
pub fn kappa_direct(r: usize, p: &Rational, users: usize) -> Rational {
    let m = users - r;
    let mut total = Rational::zero();
    for z in 0..=m {
        if z + r == 0 {
            continue;
        }
        let pmf = choose(m, z) * pow(p, z) * pow(&(Rational::one() - p), m - z);
        total += pmf * q(z as i64, (z + r) as i64);
    }
    total
}

/// Smallest ergodic centralized rate over every integer allocation with
/// `Σ r_n = budget`, `0 ≤ r_n ≤ L`.
pub fn exhaustive_centralized_minimum(probs: &[Rational], users: usize, budget: usize) -> Rational {
    let kappas: Vec<Vec<Rational>> = probs
        .iter()
        .map(|p| (0..=users).map(|r| kappa_direct(r, p, users)).collect())
        .collect();
    let mut best: Option<Rational> = None;
    for_each_vector(users + 1, probs.len(), |r| {
        if r.iter().sum::<usize>() != budget {
            return;
        }
        let rate: Rational = r.iter().enumerate().map(|(n, &rn)| kappas[n][rn].clone()).sum();
        if best.as_ref().map_or(true, |b| rate < *b) {
            best = Some(rate);
        }
    });
    best.expect("some allocation meets the budget")
}

/// Zipf popularities `n^{-α} / Σ m^{-α}` for integer `α`, exactly.
pub fn zipf_rational(n_files: usize, alpha: u32) -> Vec<Rational> {
    let weights: Vec<Rational> = (1..=n_files)
        .map(|n| q(1, (n as i64).pow(alpha)))
        .collect();
    let total: Rational = weights.iter().cloned().sum();
    weights.into_iter().map(|w| w / &total).collect()
}
