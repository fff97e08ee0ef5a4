use std::collections::HashMap;

use bitvec::prelude::*;
use rayon::prelude::*;

use super::{
    subset_users, trial_seed, xor_padded, Bits, Component, DeliveryTranscript, Message,
    SimulatedNetwork, SimulationSummary, TrialOutcome,
};
use crate::centralized::IntegerAllocation;
use crate::error::{Error, Result};
use crate::numeric::{binomial_u128, lcm_u128, subsets_of_size};
use crate::request::RequestVector;

const MAX_FILE_BITS: u128 = u32::MAX as u128;

/// Smallest multiple of every `C(L, r_n)` that is at least `requested`.
pub fn padded_file_bits(requested: usize, alloc: &IntegerAllocation) -> Result<usize> {
    let users = alloc.users();
    let mut unit = 1u128;
    for &r in alloc.levels() {
        let parts = binomial_u128(users, r).ok_or_else(too_many)?;
        unit = lcm_u128(unit, parts).ok_or_else(too_many)?;
    }
    let padded = (requested.max(1) as u128).div_ceil(unit) * unit;
    if padded > MAX_FILE_BITS {
        return Err(too_many());
    }
    Ok(padded as usize)
}

fn too_many() -> Error {
    Error::Configuration(
        "files cannot be split into equal subfiles for every replication level within 2^32 bits"
            .into(),
    )
}

/// Subsets of size `r` in increasing mask order; the position of a subset is
/// the index of its subfile.
fn labels(users: usize, r: usize) -> Vec<u64> {
    subsets_of_size(users, r)
}

fn subfile_index(labels: &[u64], mask: u64) -> usize {
    labels.binary_search(&mask).expect("label of the right size")
}

/// Per-user cached subfiles keyed by `(file, label)`.
#[derive(Debug, Clone)]
pub struct CentralizedCaches {
    caches: Vec<HashMap<(usize, u64), Bits>>,
}

impl CentralizedCaches {
    pub fn cached_bits(&self, user: usize) -> usize {
        self.caches[user].values().map(|b| b.len()).sum()
    }

    pub fn subfile(&self, user: usize, file: usize, label: u64) -> Option<&Bits> {
        self.caches[user].get(&(file, label))
    }
}

fn check_shapes(net: &SimulatedNetwork, alloc: &IntegerAllocation) -> Result<()> {
    if alloc.users() != net.users() {
        return Err(Error::DimensionMismatch {
            expected: net.users(),
            actual: alloc.users(),
        });
    }
    if alloc.n_files() != net.n_files() {
        return Err(Error::DimensionMismatch {
            expected: net.n_files(),
            actual: alloc.n_files(),
        });
    }
    Ok(())
}

struct Layout {
    labels: Vec<Vec<u64>>,
    subfile_bits: Vec<usize>,
}

impl Layout {
    fn new(net: &SimulatedNetwork, alloc: &IntegerAllocation) -> Result<Self> {
        check_shapes(net, alloc)?;
        let users = net.users();
        let labels: Vec<Vec<u64>> = (0..=users).map(|r| labels(users, r)).collect();
        let mut subfile_bits = Vec::with_capacity(users + 1);
        for r in 0..=users {
            let parts = labels[r].len();
            subfile_bits.push(net.file_bits() / parts);
        }
        for &r in alloc.levels() {
            if net.file_bits() % labels[r].len() != 0 {
                return Err(Error::Configuration(format!(
                    "file size {} is not a multiple of C({users}, {r}) = {}; pad it with padded_file_bits",
                    net.file_bits(),
                    labels[r].len()
                )));
            }
        }
        Ok(Self {
            labels,
            subfile_bits,
        })
    }

    fn subfile<'a>(&self, net: &'a SimulatedNetwork, file: usize, r: usize, label: u64) -> &'a BitSlice<u8, Lsb0> {
        let size = self.subfile_bits[r];
        let k = subfile_index(&self.labels[r], label);
        &net.file(file)[k * size..(k + 1) * size]
    }
}

/// Splits file `n` into `C(L, r_n)` subfiles labelled by user subsets of size
/// `r_n`; every user in a label caches that subfile.
pub fn place_centralized(net: &SimulatedNetwork, alloc: &IntegerAllocation) -> Result<CentralizedCaches> {
    let layout = Layout::new(net, alloc)?;
    let mut caches = vec![HashMap::new(); net.users()];
    for (file, &r) in alloc.levels().iter().enumerate() {
        for &label in &layout.labels[r] {
            let bits = layout.subfile(net, file, r, label).to_bitvec();
            for user in subset_users(label) {
                caches[user].insert((file, label), bits.clone());
            }
        }
    }
    Ok(CentralizedCaches { caches })
}

/// For every subset `S`, XORs the subfiles `(y_ℓ, S \ {ℓ})` of the users
/// `ℓ ∈ S` whose requested file has replication level `|S| - 1`.
pub fn deliver_centralized(
    net: &SimulatedNetwork,
    alloc: &IntegerAllocation,
    request: &RequestVector,
) -> Result<DeliveryTranscript> {
    let layout = Layout::new(net, alloc)?;
    request.check_against(net.n_files(), net.users())?;
    let users = net.users();
    let y = request.files();
    let mut messages = Vec::new();
    for subset in 1u64..(1 << users) {
        let level = subset.count_ones() as usize - 1;
        let parts: Vec<(usize, &BitSlice<u8, Lsb0>)> = subset_users(subset)
            .filter(|&l| alloc.levels()[y[l]] == level)
            .map(|l| (l, layout.subfile(net, y[l], level, subset & !(1 << l))))
            .collect();
        if parts.is_empty() || layout.subfile_bits[level] == 0 {
            continue;
        }
        messages.push(Message {
            subset,
            components: parts
                .iter()
                .map(|(l, b)| Component {
                    user: *l,
                    bits: b.len(),
                })
                .collect(),
            payload: xor_padded(parts.iter().map(|(_, b)| *b)),
        });
    }
    Ok(DeliveryTranscript {
        users,
        file_bits: net.file_bits(),
        messages,
    })
}

/// Reconstructs user `user`'s requested file from its cache and the transcript.
pub fn decode_centralized(
    caches: &CentralizedCaches,
    transcript: &DeliveryTranscript,
    alloc: &IntegerAllocation,
    request: &RequestVector,
    user: usize,
) -> Result<Bits> {
    let users = transcript.users;
    let y = request.files();
    let file = y[user];
    let r = alloc.levels()[file];
    let labels = labels(users, r);
    let size = transcript.file_bits / labels.len();
    let by_subset: HashMap<u64, &Message> = transcript.messages.iter().map(|m| (m.subset, m)).collect();
    let missing = |what: String| Error::InvariantViolation(format!("user {user} cannot decode: {what}"));

    let mut out = Bits::with_capacity(transcript.file_bits);
    for &label in &labels {
        if label >> user & 1 == 1 {
            let part = caches
                .subfile(user, file, label)
                .ok_or_else(|| missing(format!("subfile {label:#b} not cached")))?;
            out.extend_from_bitslice(part);
            continue;
        }
        let subset = label | 1 << user;
        let msg = by_subset
            .get(&subset)
            .ok_or_else(|| missing(format!("no message for subset {subset:#b}")))?;
        let mut parts: Vec<&BitSlice<u8, Lsb0>> = vec![&msg.payload];
        for c in msg.components.iter().filter(|c| c.user != user) {
            let side = caches
                .subfile(user, y[c.user], subset & !(1 << c.user))
                .ok_or_else(|| missing(format!("side information for user {} missing", c.user)))?;
            parts.push(side);
        }
        let decoded = xor_padded(parts);
        if decoded.len() < size {
            return Err(missing(format!("payload for subset {subset:#b} too short")));
        }
        out.extend_from_bitslice(&decoded[..size]);
    }
    Ok(out)
}

/// Runs `trials` independent databases through placement, delivery and
/// decoding. The file size is padded to a multiple of every `C(L, r_n)`.
pub fn simulate_centralized(
    alloc: &IntegerAllocation,
    request: &RequestVector,
    file_bits: usize,
    trials: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let padded = padded_file_bits(file_bits, alloc)?;
    request.check_against(alloc.n_files(), alloc.users())?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let net = SimulatedNetwork::new(alloc.n_files(), alloc.users(), padded, trial_seed(seed, t))?;
            let caches = place_centralized(&net, alloc)?;
            let transcript = deliver_centralized(&net, alloc, request)?;
            let mut decode_ok = true;
            for user in 0..net.users() {
                let got = decode_centralized(&caches, &transcript, alloc, request, user)?;
                decode_ok &= got.as_bitslice() == net.file(request.files()[user]);
            }
            Ok(TrialOutcome {
                rate: transcript.normalized_rate(),
                total_bits: transcript.total_bits(),
                decode_ok,
                max_cache_bits: (0..net.users()).map(|u| caches.cached_bits(u)).max().unwrap_or(0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationSummary::from_trials(padded, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centralized::{static_rate_by_levels_in, static_rate_for_request};
    use crate::exact::Rational;

    fn alloc(r: &[usize], users: usize) -> IntegerAllocation {
        IntegerAllocation::new(r.to_vec(), users).unwrap()
    }

    #[test]
    fn two_user_example() {
        let a = alloc(&[1, 1], 2);
        let net = SimulatedNetwork::new(2, 2, 4, 3).unwrap();
        let caches = place_centralized(&net, &a).unwrap();
        assert_eq!(caches.cached_bits(0), 4);
        assert_eq!(caches.cached_bits(1), 4);
        let y = RequestVector::new(vec![0, 1], 2).unwrap();
        let t = deliver_centralized(&net, &a, &y).unwrap();
        assert_eq!(t.messages.len(), 1);
        assert_eq!(t.messages[0].payload.len(), 2);
        assert_eq!(t.normalized_rate(), 0.5);
        for user in 0..2 {
            let got = decode_centralized(&caches, &t, &a, &y, user).unwrap();
            assert_eq!(got.as_bitslice(), net.file(y.files()[user]));
        }
    }

    #[test]
    fn empty_and_full_caches() {
        let net = SimulatedNetwork::new(3, 3, 30, 1).unwrap();
        let none = alloc(&[0, 0, 0], 3);
        let caches = place_centralized(&net, &none).unwrap();
        assert!((0..3).all(|u| caches.cached_bits(u) == 0));
        let full = alloc(&[3, 3, 3], 3);
        let caches = place_centralized(&net, &full).unwrap();
        assert!((0..3).all(|u| caches.cached_bits(u) == 90));
        let y = RequestVector::new(vec![2, 0, 2], 3).unwrap();
        let t = deliver_centralized(&net, &full, &y).unwrap();
        assert!(t.messages.is_empty());
        assert_eq!(t.normalized_rate(), 0.0);
    }

    #[test]
    fn padding() {
        let a = alloc(&[1, 2, 0], 4);
        assert_eq!(padded_file_bits(10, &a).unwrap(), 12);
        assert_eq!(padded_file_bits(12, &a).unwrap(), 12);
        let net = SimulatedNetwork::new(3, 4, 10, 1).unwrap();
        assert!(matches!(place_centralized(&net, &a), Err(Error::Configuration(_))));
    }

    #[test]
    fn rate_matches_formula_and_decodes() {
        let a = alloc(&[3, 2, 1, 1, 0], 4);
        let y = RequestVector::new(vec![1, 2, 4, 1], 5).unwrap();
        let s = simulate_centralized(&a, &y, 100, 3, 9).unwrap();
        assert!(s.decode_ok);
        let levels: Vec<usize> = y.files().iter().map(|&f| a.levels()[f]).collect();
        let exact: Rational = static_rate_by_levels_in(&levels, 4);
        let simulated = Rational::new(((s.total_bits / 3) as i64).into(), (s.file_bits as i64).into());
        assert_eq!(simulated, exact);
        assert!((s.rate - static_rate_for_request(&a, &y).unwrap()).abs() < 1e-15);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.max_cache_bits * 4, s.file_bits * 7);
    }
}
